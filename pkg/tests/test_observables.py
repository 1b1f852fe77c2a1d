import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from livsiclab.observables import (
    TrigObservable,
    birkhoff_cocycle,
    birkhoff_sum,
    coboundary_from,
    normalize_zero_mean,
)
from livsiclab.sampling import block_rng, uniform_words
from livsiclab.torus import HyperbolicToralMap, RationalTorusPoint, TorusPoint, apply, words_to_unit

from oracles import birkhoff_sum_rational, trig_at_fraction

amps = st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False)
freq = st.tuples(st.integers(-4, 4), st.integers(-4, 4))
observables = st.lists(st.tuples(freq, amps, amps), max_size=6).map(lambda ts: TrigObservable.build(*ts))

CAT = HyperbolicToralMap(2, 1, 1, 1)


@given(observables)
def test_spec_roundtrip(phi):
    text = json.dumps(phi.to_spec())
    assert TrigObservable.from_spec(json.loads(text)) == phi


def test_canonical_merge():
    phi = TrigObservable.build(((1, 0), 1.0, 0.5), ((-1, 0), 1.0, 0.5))
    # cos is even, sin is odd: the sine parts cancel
    assert phi.terms == {(1, 0): (2.0, 0.0)}
    assert TrigObservable.build(((0, 0), 1.0, 4.0)).terms == {(0, 0): (1.0, 0.0)}
    assert (TrigObservable.cos(1, 0) - TrigObservable.cos(1, 0)).is_zero


@given(observables)
def test_evaluation_paths_agree(phi):
    w1, w2 = uniform_words(block_rng(1, 0), 200)
    x1, x2 = words_to_unit(w1), words_to_unit(w2)
    a = phi.evaluate_words(w1, w2)
    b = phi(x1, x2)
    assert np.allclose(a, b, atol=1e-9)


@given(observables, st.integers(1, 30), st.integers(0, 29), st.integers(0, 29))
def test_rational_evaluation(phi, d, i, j):
    p = RationalTorusPoint(i, j, d)
    ref = trig_at_fraction(phi, (Fraction(p.n1, p.d), Fraction(p.n2, p.d)))
    assert phi.evaluate_rational(p) == pytest.approx(ref, abs=1e-12)


def test_known_values():
    phi = TrigObservable.cos(1, 0) + TrigObservable.cos(0, 1)
    assert phi(0.0, 0.0) == 2.0
    assert phi(0.5, 0.25) == pytest.approx(-1.0, abs=1e-15)
    assert phi.mean == 0.0
    assert (phi + 0.3).mean == 0.3
    assert normalize_zero_mean(phi + 0.3) == phi


def test_lipschitz_formula():
    phi = TrigObservable.cos(1, 0) + TrigObservable.sin(1, 1, 0.5)
    expected = 2 * math.pi * 1 + 2 * math.pi * math.sqrt(2) * 0.5 + 1.5
    assert phi.lipschitz_norm() == pytest.approx(expected)


@given(observables)
def test_lipschitz_bounds_gradient_and_sup(phi):
    rng = np.random.default_rng(0)
    x = rng.random((2, 500))
    g1, g2 = phi.gradient(x[0], x[1])
    grad = np.hypot(g1, g2)
    L = phi.lipschitz_norm()
    assert np.all(grad <= L + 1e-9)
    assert np.all(np.abs(phi(x[0], x[1])) <= phi.sup_bound() + 1e-9)


def test_gradient_matches_finite_difference():
    phi = TrigObservable.cos(2, 1, 0.7) + TrigObservable.sin(1, -3, 0.2)
    h = 1e-6
    for x in [(0.1, 0.2), (0.77, 0.31)]:
        g1, g2 = phi.gradient(*x)
        f1 = (phi(x[0] + h, x[1]) - phi(x[0] - h, x[1])) / (2 * h)
        f2 = (phi(x[0], x[1] + h) - phi(x[0], x[1] - h)) / (2 * h)
        assert g1 == pytest.approx(f1, abs=1e-6) and g2 == pytest.approx(f2, abs=1e-6)


@given(observables)
def test_coboundary_from_is_pointwise_correct(psi):
    phi = coboundary_from(psi, CAT)
    for x in [TorusPoint(0.1, 0.7), TorusPoint(0.45, 0.05)]:
        y = apply(CAT, x)
        assert phi(x.x1, x.x2) == pytest.approx(psi(y.x1, y.x2) - psi(x.x1, x.x2), abs=1e-9)


def test_coboundary_rejects_nonlinear():
    from livsiclab.torus import ShearedMap
    m = ShearedMap(CAT, 0.05, TrigObservable.sin(0, 1))
    with pytest.raises(TypeError):
        coboundary_from(TrigObservable.cos(1, 0), m)


@pytest.mark.parametrize("p,d", [((1, 3), 5), ((2, 7), 11), ((1, 1), 3)])
def test_birkhoff_sum_on_periodic_start(p, d):
    phi = TrigObservable.cos(1, 0) + TrigObservable.sin(1, 1, 0.5)
    x = TorusPoint(p[0] / d, p[1] / d)
    ref = birkhoff_sum_rational(phi, [[2, 1], [1, 1]], (Fraction(p[0], d), Fraction(p[1], d)), 12)
    assert birkhoff_sum(phi, CAT, x, 12) == pytest.approx(ref, abs=1e-9)


@given(st.integers(0, 2 ** 50 - 1), st.integers(0, 2 ** 50 - 1), st.integers(0, 60), st.integers(0, 60))
def test_cocycle_additivity(a, b, n1, n2):
    # 50-bit dyadic points: the orbit stays on a lattice doubles represent exactly
    phi = TrigObservable.cos(1, 0) + TrigObservable.cos(0, 1)
    x = TorusPoint(a / 2 ** 50, b / 2 ** 50)
    w = x.words()
    for _ in range(n2):
        w = CAT.step_int(*w)
    y = TorusPoint.from_words(*w)
    whole = birkhoff_cocycle(phi, CAT, x, n1 + n2)
    parts = birkhoff_cocycle(phi, CAT, y, n1) + birkhoff_cocycle(phi, CAT, x, n2)
    assert whole.steps == parts.steps
    assert whole.value == pytest.approx(parts.value, abs=1e-12)


def test_birkhoff_trivial_cases():
    phi = TrigObservable.cos(1, 0)
    x = TorusPoint(0.2, 0.3)
    assert birkhoff_sum(phi, CAT, x, 0) == 0.0
    assert birkhoff_sum(TrigObservable.constant(1.5), CAT, x, 7) == pytest.approx(10.5)
    assert birkhoff_sum(phi, CAT, TorusPoint(0, 0), 10) == 10.0
