"""Trigonometric-polynomial observables, Birkhoff sums and exact coboundaries.

An observable is a finite sum ``a_k cos(2 pi k.x) + b_k sin(2 pi k.x)`` over
integer frequencies ``k``.  Frequencies are stored in a canonical half-plane
(first nonzero component positive), so ``k`` and ``-k`` never coexist and
algebraic cancellation is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .torus import (
    MASK,
    UNIT,
    HyperbolicToralMap,
    RationalTorusPoint,
    TorusPoint,
    orbit_words,
)

TWO_PI = 2.0 * math.pi


def _canonical(k1: int, k2: int, a: float, b: float):
    if k1 < 0 or (k1 == 0 and k2 < 0):
        return (-k1, -k2), a, -b
    return (k1, k2), a, b


@dataclass(frozen=True, eq=False)
class TrigObservable:
    terms: Mapping[tuple[int, int], tuple[float, float]]

    def __post_init__(self):
        merged: dict[tuple[int, int], list[float]] = {}
        for (k1, k2), (a, b) in dict(self.terms).items():
            key, a, b = _canonical(int(k1), int(k2), float(a), float(b))
            slot = merged.setdefault(key, [0.0, 0.0])
            slot[0] += a
            slot[1] += b
        clean = {}
        for key in sorted(merged):
            a, b = merged[key]
            if key == (0, 0):
                b = 0.0
            if a != 0.0 or b != 0.0:
                clean[key] = (a, b)
        object.__setattr__(self, "terms", clean)

    @classmethod
    def build(cls, *terms: tuple) -> "TrigObservable":
        """``build(((1, 0), 1.0, 0.0), ...)`` from ``(k, cos, sin)`` triples."""
        out: dict = {}
        for k, a, b in terms:
            key, a, b = _canonical(int(k[0]), int(k[1]), float(a), float(b))
            prev = out.get(key, (0.0, 0.0))
            out[key] = (prev[0] + a, prev[1] + b)
        return cls(out)

    @classmethod
    def constant(cls, c: float) -> "TrigObservable":
        return cls({(0, 0): (float(c), 0.0)})

    @classmethod
    def zero(cls) -> "TrigObservable":
        return cls({})

    @classmethod
    def cos(cls, k1: int, k2: int, amplitude: float = 1.0) -> "TrigObservable":
        return cls({(k1, k2): (amplitude, 0.0)})

    @classmethod
    def sin(cls, k1: int, k2: int, amplitude: float = 1.0) -> "TrigObservable":
        return cls({(k1, k2): (0.0, amplitude)})

    # algebra

    def __eq__(self, other):
        return isinstance(other, TrigObservable) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(self.terms.items()))

    def __add__(self, other):
        if not isinstance(other, TrigObservable):
            other = TrigObservable.constant(other)
        out = dict(self.terms)
        for k, (a, b) in other.terms.items():
            pa, pb = out.get(k, (0.0, 0.0))
            out[k] = (pa + a, pb + b)
        return TrigObservable(out)

    __radd__ = __add__

    def __mul__(self, t):
        t = float(t)
        return TrigObservable({k: (t * a, t * b) for k, (a, b) in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, TrigObservable) else -float(other))

    def __repr__(self):
        return f"TrigObservable({self.terms!r})"

    @property
    def mean(self) -> float:
        return self.terms.get((0, 0), (0.0, 0.0))[0]

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def sup_bound(self) -> float:
        """``sum |a_k| + |b_k|``, an upper bound for ``sup |phi|``."""
        return math.fsum(abs(a) + abs(b) for a, b in self.terms.values())

    def lipschitz_norm(self) -> float:
        grad = math.fsum(
            TWO_PI * math.hypot(k1, k2) * (abs(a) + abs(b))
            for (k1, k2), (a, b) in self.terms.items()
        )
        return grad + self.sup_bound()

    def max_frequency(self) -> int:
        return max((max(abs(k1), abs(k2)) for k1, k2 in self.terms), default=0)

    # evaluation

    def __call__(self, x1, x2):
        """Evaluate on float coordinates (scalars or arrays)."""
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for (k1, k2), (a, b) in self.terms.items():
            if k1 == 0 and k2 == 0:
                out = out + a
                continue
            ph = k1 * x1 + k2 * x2
            ph = TWO_PI * (ph - np.floor(ph))
            if a:
                out = out + a * np.cos(ph)
            if b:
                out = out + b * np.sin(ph)
        return out

    def evaluate_words(self, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
        """Evaluate at lattice words; phases ``k.x mod 1`` are reduced exactly."""
        out = np.zeros(w1.shape)
        for (k1, k2), (a, b) in self.terms.items():
            if k1 == 0 and k2 == 0:
                out += a
                continue
            ph = _phase_words(k1, k2, w1, w2).astype(np.float64) * (TWO_PI * UNIT)
            if a:
                out += a * np.cos(ph)
            if b:
                out += b * np.sin(ph)
        return out

    def evaluate_rational(self, p: RationalTorusPoint) -> float:
        """Evaluate at an exact rational point with integer phase reduction."""
        total = []
        for (k1, k2), (a, b) in self.terms.items():
            r = (k1 * p.n1 + k2 * p.n2) % p.d
            ph = TWO_PI * r / p.d
            total.append(a * math.cos(ph) + b * math.sin(ph))
        return math.fsum(total)

    def gradient(self, x1, x2):
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        g1 = np.zeros(np.broadcast(x1, x2).shape)
        g2 = np.zeros_like(g1)
        for (k1, k2), (a, b) in self.terms.items():
            if k1 == 0 and k2 == 0:
                continue
            ph = k1 * x1 + k2 * x2
            ph = TWO_PI * (ph - np.floor(ph))
            d = TWO_PI * (-a * np.sin(ph) + b * np.cos(ph))
            g1 = g1 + k1 * d
            g2 = g2 + k2 * d
        return g1, g2

    # composition and serialization

    def compose_linear(self, tmap: HyperbolicToralMap) -> "TrigObservable":
        """``x -> phi(Mx)``: frequency ``k`` moves to ``M^T k``."""
        out = {}
        for (k1, k2), (a, b) in self.terms.items():
            key = (tmap.m11 * k1 + tmap.m21 * k2, tmap.m12 * k1 + tmap.m22 * k2)
            key, a, b = _canonical(*key, a, b)
            pa, pb = out.get(key, (0.0, 0.0))
            out[key] = (pa + a, pb + b)
        return TrigObservable(out)

    def to_spec(self) -> dict:
        return {
            "terms": [
                {"k": [k1, k2], "cos": a, "sin": b} for (k1, k2), (a, b) in self.terms.items()
            ]
        }

    @classmethod
    def from_spec(cls, spec: Mapping) -> "TrigObservable":
        if not isinstance(spec, Mapping) or "terms" not in spec:
            raise ValueError("observable spec must be an object with a 'terms' list")
        triples = []
        for t in spec["terms"]:
            k = t["k"]
            if len(k) != 2 or any(isinstance(v, bool) or int(v) != v for v in k):
                raise ValueError(f"frequency must be two integers, got {k!r}")
            triples.append(((int(k[0]), int(k[1])), float(t.get("cos", 0.0)), float(t.get("sin", 0.0))))
        return cls.build(*triples)


def _phase_words(k1: int, k2: int, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    if k2 == 0:
        return w1 if k1 == 1 else np.uint64(k1 % (MASK + 1)) * w1
    if k1 == 0:
        return w2 if k2 == 1 else np.uint64(k2 % (MASK + 1)) * w2
    return np.uint64(k1 % (MASK + 1)) * w1 + np.uint64(k2 % (MASK + 1)) * w2


@dataclass(frozen=True)
class CocycleValue:
    """``A(n, x)``; adding ``A(n1, T^n2 x)`` to ``A(n2, x)`` gives ``A(n1 + n2, x)``."""

    value: float
    steps: int

    def __add__(self, other: "CocycleValue") -> "CocycleValue":
        return CocycleValue(self.value + other.value, self.steps + other.steps)


def evaluate(phi: TrigObservable, x: TorusPoint) -> float:
    return float(phi(x.x1, x.x2))


def birkhoff_sum(phi: TrigObservable, tmap, x: TorusPoint, n: int) -> float:
    """``phi(x) + phi(Tx) + ... + phi(T^(n-1) x)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0.0
    w1, w2 = orbit_words(tmap, x, n)
    return math.fsum(phi.evaluate_words(w1, w2))


def birkhoff_cocycle(phi: TrigObservable, tmap, x: TorusPoint, n: int) -> CocycleValue:
    return CocycleValue(birkhoff_sum(phi, tmap, x, n), n)


def coboundary_from(psi: TrigObservable, tmap) -> TrigObservable:
    """The observable ``psi o T - psi`` as an exact trigonometric polynomial."""
    if not isinstance(tmap, HyperbolicToralMap):
        raise TypeError("coboundary_from needs a linear map; sheared compositions leave the class")
    return psi.compose_linear(tmap) - psi


def normalize_zero_mean(phi: TrigObservable) -> TrigObservable:
    return TrigObservable({k: v for k, v in phi.terms.items() if k != (0, 0)})


def lipschitz_norm(phi: TrigObservable) -> float:
    return phi.lipschitz_norm()


def sum_terms(observables: Iterable[TrigObservable]) -> TrigObservable:
    out = TrigObservable.zero()
    for o in observables:
        out = out + o
    return out
