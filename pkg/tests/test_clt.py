import numpy as np
import pytest
from scipy import stats

from livsiclab.clt import (
    clt_report,
    estimate_variance,
    gaussian_tail,
    ks_distance,
    ks_statistic,
    sample_birkhoff,
    tail_fraction,
)
from livsiclab.observables import TrigObservable
from livsiclab.output import dumps
from livsiclab.torus import ShearedMap

from oracles import exact_variance

C = TrigObservable.cos
M = [[2, 1], [1, 1]]


@pytest.mark.parametrize("phi", [C(1, 0), C(1, 0) + C(0, 1), C(1, 0) + C(2, 1), C(1, 0) + 0.5 * C(1, 1)],
                         ids=["cos x1", "cos+cos", "correlated", "partial"])
def test_variance_matches_frequency_oracle(cat, phi):
    n, count = 200, 20000
    exact = exact_variance(phi, M)
    est = estimate_variance(phi, cat, n, count, seed=11)
    # finite-n bias is sum |j| C_j / n, at most a few / n for these observables
    assert abs(est.sigma_squared - exact) <= 5 * est.standard_error + 3.0 / n
    assert abs(est.autocorr_sigma_squared - exact) <= 5 * est.autocorr_standard_error
    assert est.estimators_agree


def test_oracle_constants():
    assert exact_variance(C(1, 0) + C(0, 1), M) == pytest.approx(1.0)
    assert exact_variance(C(1, 0), M) == pytest.approx(0.5)
    assert exact_variance(C(1, 0) + C(2, 1), M) == pytest.approx(2.0)


def test_disagreeing_estimators_warn(cat):
    # correlation at lag 1 is invisible with lags = 1
    with pytest.warns(RuntimeWarning, match="disagree"):
        est = estimate_variance(C(1, 0) + C(2, 1), cat, 100, 20000, seed=1, lags=1)
    assert not est.estimators_agree


@pytest.mark.parametrize("shift", [0.0, 0.3])
def test_ks_matches_scipy(shift):
    z = np.random.default_rng(2).standard_normal(5000) + shift
    ref = stats.kstest(z, "norm").statistic
    assert ks_statistic(z) == pytest.approx(ref, abs=1e-12)


def test_ks_normalized_sums(cat):
    s = sample_birkhoff(C(1, 0) + C(0, 1), cat, 500, 20000, seed=3)
    assert ks_distance(s, 1.0) < 0.03
    with pytest.raises(ValueError):
        ks_distance(s, 0.0)


def test_tail_fraction_is_strict():
    assert tail_fraction(np.array([0.0, 1.0, 1.0, 2.0]), 1.0) == 0.25
    assert gaussian_tail(0.0) == 0.5


def test_count_floor(cat):
    with pytest.raises(ValueError):
        sample_birkhoff(C(1, 0), cat, 10, 999, seed=1)


def test_report_deterministic_across_threads(cat):
    phi = C(1, 0) + C(0, 1)
    a = clt_report(phi, cat, [10, 100], 40000, seed=5, thresholds=(0.0, 2.0), threads=1)
    b = clt_report(phi, cat, [10, 100], 40000, seed=5, thresholds=(0.0, 2.0), threads=4)
    assert dumps(a) == dumps(b)


def test_report_rows_equal_direct_samples(cat):
    phi = C(1, 0) + C(0, 1)
    rep = clt_report(phi, cat, [7, 50], 5000, seed=9, thresholds=(1.0,))
    s = sample_birkhoff(phi, cat, 50, 5000, seed=9)
    assert rep["rows"][1]["tails"][0]["fraction"] == tail_fraction(s.values, 1.0)
    assert rep["rows"][1]["sigma_squared"] == float(np.mean(s.values ** 2) / 50)


def test_mean_is_removed(cat):
    rep = clt_report(C(1, 0) + 0.7, cat, [100], 5000, seed=1)
    assert rep["observable_mean_removed"] == 0.7
    assert rep["rows"][0]["sigma_squared"] == pytest.approx(0.5, rel=0.1)


def test_sheared_map_is_empirical(cat):
    m = ShearedMap(cat, 0.05, TrigObservable.sin(0, 1)).certified()
    rep = clt_report(C(1, 0) + C(0, 1), m, [100], 5000, seed=1)
    assert rep["empirical_only"] is True
    assert rep["rows"][0]["sigma_squared"] > 0.3
