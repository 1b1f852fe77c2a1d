"""Suspension flows over toral maps.

The phase space is ``{(x, s): 0 <= s < r(x)}`` with ``(x, r(x)) ~ (T x, 0)``;
points move up at unit speed.  Base points stay on the exact lattice of
:mod:`torus`, so only heights carry rounding.

Observables on the suspension are sums ``B(x) * r(x)**p * P(s / r(x))`` with
``B`` a trigonometric base observable and ``P`` a trigonometric profile in
``u = s / r`` on ``[0, 1]``.  Flow integrals are computed one roof segment at
a time with 16-point Gauss-Legendre quadrature (segments longer than 2 time
units are split).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .clt import ks_statistic, tail_fraction, variance_from_values
from .observables import TWO_PI, TrigObservable
from .orbits import PeriodicOrbit
from .sampling import BLOCK, block_rng, block_sizes, map_blocks, uniform_words
from .torus import TorusPoint, require_certified, to_fixed, words_to_unit

GL_ORDER = 16
MAX_SEGMENT = 2.0
ROOF_GRID = 256
ROOF_FLOOR = 0.1
GENERATOR_STEP = 1e-5

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


@dataclass(frozen=True)
class RoofFunction:
    base_constant: float
    oscillation: TrigObservable = field(default_factory=TrigObservable.zero)

    def __post_init__(self):
        if not self.base_constant > 0:
            raise ValueError("roof constant must be positive")
        if self.oscillation.mean != 0.0:
            # fold any constant term of the oscillation into base_constant
            osc = self.oscillation - TrigObservable.constant(self.oscillation.mean)
            object.__setattr__(self, "base_constant", self.base_constant + self.oscillation.mean)
            object.__setattr__(self, "oscillation", osc)
        if self.grid_min() < ROOF_FLOOR:
            raise ValueError(f"roof must stay >= {ROOF_FLOOR} (grid minimum {self.grid_min():.6g})")

    def grid_min(self, n: int = ROOF_GRID) -> float:
        g = np.arange(n) / n
        x1, x2 = np.meshgrid(g, g, indexing="ij")
        return float(np.min(self.base_constant + self.oscillation(x1, x2)))

    @property
    def mean(self) -> float:
        return self.base_constant

    @property
    def sup_bound(self) -> float:
        return self.base_constant + self.oscillation.sup_bound()

    @property
    def is_constant(self) -> bool:
        return self.oscillation.is_zero

    def words(self, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
        if self.is_constant:
            return np.full(np.shape(w1), self.base_constant)
        return self.base_constant + self.oscillation.evaluate_words(w1, w2)

    def __call__(self, x1, x2):
        return self.base_constant + self.oscillation(x1, x2)

    def at_rational(self, p) -> float:
        return self.base_constant + self.oscillation.evaluate_rational(p)

    def to_spec(self) -> dict:
        return {"constant": self.base_constant, "oscillation": self.oscillation.to_spec()}

    @classmethod
    def from_spec(cls, spec: Mapping) -> "RoofFunction":
        if "constant" not in spec:
            raise ValueError("roof spec needs a 'constant' entry")
        return cls(float(spec["constant"]), TrigObservable.from_spec(spec.get("oscillation", {"terms": []})))


@dataclass(frozen=True)
class FlowPoint:
    """Point of the suspension; the base is kept as exact lattice words."""

    w1: int
    w2: int
    height: float

    @classmethod
    def at(cls, base: TorusPoint, height: float = 0.0) -> "FlowPoint":
        w1, w2 = base.words()
        return cls(w1, w2, float(height))

    @property
    def base(self) -> TorusPoint:
        return TorusPoint.from_words(self.w1, self.w2)


@dataclass(frozen=True)
class FlowCocycleValue:
    value: float
    elapsed: float

    def __add__(self, other: "FlowCocycleValue") -> "FlowCocycleValue":
        return FlowCocycleValue(self.value + other.value, self.elapsed + other.elapsed)


@dataclass(frozen=True)
class HeightProfile:
    """``P(u) = sum a cos(2 pi m u) + b sin(2 pi m u)``; ``m = 0`` is the constant."""

    terms: tuple = ((0, 1.0, 0.0),)

    def __post_init__(self):
        clean = tuple((int(m), float(a), 0.0 if int(m) == 0 else float(b)) for m, a, b in self.terms)
        if any(m < 0 for m, _, _ in clean):
            raise ValueError("profile frequencies must be >= 0")
        object.__setattr__(self, "terms", clean)

    @property
    def is_constant(self) -> bool:
        return all(m == 0 or (a == 0.0 and b == 0.0) for m, a, b in self.terms)

    @property
    def mean(self) -> float:
        return sum(a for m, a, _ in self.terms if m == 0)

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros(u.shape)
        for m, a, b in self.terms:
            if m == 0:
                out += a
                continue
            ph = TWO_PI * m * u
            if a:
                out += a * np.cos(ph)
            if b:
                out += b * np.sin(ph)
        return out

    def to_spec(self) -> list:
        return [[m, a, b] for m, a, b in self.terms]


@dataclass(frozen=True)
class SuspensionTerm:
    base: TrigObservable
    roof_power: int = 0
    profile: HeightProfile = field(default_factory=HeightProfile)


@dataclass(frozen=True)
class SuspensionObservable:
    terms: tuple

    @classmethod
    def lift(cls, phi: TrigObservable) -> "SuspensionObservable":
        """Height-constant extension of a base observable."""
        return cls((SuspensionTerm(phi),))

    @classmethod
    def constant(cls, c: float) -> "SuspensionObservable":
        return cls.lift(TrigObservable.constant(c))

    def __add__(self, other: "SuspensionObservable") -> "SuspensionObservable":
        return SuspensionObservable(self.terms + other.terms)

    def __mul__(self, c: float) -> "SuspensionObservable":
        return SuspensionObservable(tuple(SuspensionTerm(t.base * c, t.roof_power, t.profile) for t in self.terms))

    __rmul__ = __mul__

    def _coef(self, term: SuspensionTerm, w1, w2, r):
        c = term.base.evaluate_words(w1, w2)
        if term.roof_power:
            c = c * r ** term.roof_power
        return c

    def evaluate(self, w1: np.ndarray, w2: np.ndarray, s: np.ndarray, r: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(s))
        for t in self.terms:
            out += self._coef(t, w1, w2, r) * t.profile(s / r)
        return out

    def segment_integral(self, w1, w2, r, a, b) -> np.ndarray:
        """``int_a^b phi(x, s) ds`` on the fibre over ``x``, vectorized over points."""
        length = b - a
        out = np.zeros(np.shape(a))
        varying = [t for t in self.terms if not t.profile.is_constant]
        for t in self.terms:
            if t.profile.is_constant:
                out += self._coef(t, w1, w2, r) * t.profile.mean * length
        if not varying or not len(a):
            return out
        pieces = max(1, int(math.ceil(float(np.max(length)) / MAX_SEGMENT)))
        # nodes: (n, pieces * GL_ORDER)
        width = length / pieces
        offs = (np.arange(pieces)[:, None] + (_GL_X[None, :] + 1.0) / 2.0).ravel()
        s = a[:, None] + width[:, None] * offs[None, :]
        wts = np.tile(_GL_W / 2.0, pieces)
        u = s / r[:, None]
        for t in varying:
            vals = t.profile(u) @ wts
            out += self._coef(t, w1, w2, r) * vals * width
        return out

    def to_spec(self) -> dict:
        return {"terms": [{"base": t.base.to_spec(), "roof_power": t.roof_power, "profile": t.profile.to_spec()}
                          for t in self.terms]}

    @classmethod
    def from_spec(cls, spec: Mapping) -> "SuspensionObservable":
        """Accepts either this format or a plain base observable spec (lifted)."""
        terms = spec.get("terms", [])
        if all("k" in t for t in terms):
            return cls.lift(TrigObservable.from_spec(spec))
        out = []
        for t in terms:
            prof = HeightProfile(tuple(tuple(x) for x in t.get("profile", [[0, 1.0, 0.0]])))
            out.append(SuspensionTerm(TrigObservable.from_spec(t["base"]), int(t.get("roof_power", 0)), prof))
        return cls(tuple(out))


def flow_coboundary(psi: Optional[TrigObservable] = None, m: int = 1):
    """Generator and transfer function of ``Psi(x, s) = psi(x) sin(2 pi m s / r(x))``.

    ``Psi`` vanishes at ``s = 0`` and ``s = r(x)``, so it is continuous on the
    suspension, and its derivative along the flow is
    ``psi(x) (2 pi m / r(x)) cos(2 pi m s / r(x))``.
    """
    psi = TrigObservable.constant(1.0) if psi is None else psi
    gen = SuspensionObservable((SuspensionTerm(psi * (TWO_PI * m), -1, HeightProfile(((m, 1.0, 0.0),))),))
    transfer = SuspensionObservable((SuspensionTerm(psi, 0, HeightProfile(((m, 0.0, 1.0),))),))
    return gen, transfer


# engine

def _advance(tmap, roof: RoofFunction, w1, w2, h, t, phi: Optional[SuspensionObservable] = None):
    """Flow arrays of points forward by ``t >= 0``; optionally integrate ``phi``."""
    w1 = np.array(w1, dtype=np.uint64)
    w2 = np.array(w2, dtype=np.uint64)
    h = np.array(h, dtype=np.float64)
    rem = np.broadcast_to(np.asarray(t, dtype=np.float64), h.shape).copy()
    acc = np.zeros(h.shape)
    r = roof.words(w1, w2)
    active = np.arange(h.size)
    while active.size:
        ha, ra, rema = h[active], r[active], rem[active]
        cross = ha + rema >= ra
        end = np.where(cross, ra, ha + rema)
        if phi is not None:
            acc[active] += phi.segment_integral(w1[active], w2[active], ra, ha, end)
        stay = active[~cross]
        h[stay] = end[~cross]
        moved = active[cross]
        if moved.size:
            rem[moved] = np.maximum(rema[cross] - (ra[cross] - ha[cross]), 0.0)
            w1[moved], w2[moved] = tmap.step(w1[moved], w2[moved])
            h[moved] = 0.0
            r[moved] = roof.words(w1[moved], w2[moved])
        active = moved
    return w1, w2, h, acc


def _retreat(tmap, roof: RoofFunction, w1, w2, h, t):
    """Flow backward by ``t >= 0``."""
    w1 = np.array(w1, dtype=np.uint64)
    w2 = np.array(w2, dtype=np.uint64)
    h = np.array(h, dtype=np.float64)
    rem = np.broadcast_to(np.asarray(t, dtype=np.float64), h.shape).copy()
    active = np.arange(h.size)
    while active.size:
        ha, rema = h[active], rem[active]
        back = ha - rema < 0.0
        stay = active[~back]
        h[stay] = ha[~back] - rema[~back]
        moved = active[back]
        if moved.size:
            rem[moved] = rema[back] - ha[back]
            w1[moved], w2[moved] = tmap.step_inverse(w1[moved], w2[moved])
            h[moved] = roof.words(w1[moved], w2[moved])
        active = moved
    return w1, w2, h


def flow_arrays(tmap, roof: RoofFunction, w1, w2, h, t):
    """Vectorized flow; ``t`` may be a scalar or an array, of either sign."""
    h = np.asarray(h, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), h.shape)
    w1 = np.array(w1, dtype=np.uint64)
    w2 = np.array(w2, dtype=np.uint64)
    h = h.copy()
    fwd = t >= 0
    if fwd.any():
        a, b, c, _ = _advance(tmap, roof, w1[fwd], w2[fwd], h[fwd], t[fwd])
        w1[fwd], w2[fwd], h[fwd] = a, b, c
    if (~fwd).any():
        a, b, c = _retreat(tmap, roof, w1[~fwd], w2[~fwd], h[~fwd], -t[~fwd])
        w1[~fwd], w2[~fwd], h[~fwd] = a, b, c
    return w1, w2, h


def canonical(point: FlowPoint, roof: RoofFunction, tmap) -> FlowPoint:
    """Reduce an arbitrary height to ``[0, roof(base))``."""
    w1, w2, h = flow_arrays(tmap, roof, [point.w1], [point.w2], [0.0], point.height)
    return FlowPoint(int(w1[0]), int(w2[0]), float(h[0]))


def flow(point: FlowPoint, t: float, roof: RoofFunction, tmap) -> FlowPoint:
    require_certified(tmap)
    w1, w2, h = flow_arrays(tmap, roof, [point.w1], [point.w2], [point.height], t)
    return FlowPoint(int(w1[0]), int(w2[0]), float(h[0]))


def flow_cocycle_arrays(phi: SuspensionObservable, t, w1, w2, h, roof: RoofFunction, tmap) -> np.ndarray:
    """``A(t, x) = int_0^t phi(flow_s x) ds`` for arrays of points."""
    h = np.asarray(h, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), h.shape)
    out = np.zeros(h.shape)
    fwd = t >= 0
    w1 = np.asarray(w1, dtype=np.uint64)
    w2 = np.asarray(w2, dtype=np.uint64)
    if fwd.any():
        out[fwd] = _advance(tmap, roof, w1[fwd], w2[fwd], h[fwd], t[fwd], phi)[3]
    if (~fwd).any():
        # A(-t, x) = -A(t, flow_{-t} x)
        b1, b2, bh = _retreat(tmap, roof, w1[~fwd], w2[~fwd], h[~fwd], -t[~fwd])
        out[~fwd] = -_advance(tmap, roof, b1, b2, bh, -t[~fwd], phi)[3]
    return out


def flow_cocycle(phi: SuspensionObservable, t: float, x: FlowPoint, roof: RoofFunction, tmap) -> FlowCocycleValue:
    require_certified(tmap)
    v = flow_cocycle_arrays(phi, t, [x.w1], [x.w2], [x.height], roof, tmap)
    return FlowCocycleValue(float(v[0]), float(t))


def evaluate_at(phi: SuspensionObservable, x: FlowPoint, roof: RoofFunction, tmap=None) -> float:
    """``phi(x)``; heights outside ``[0, r)`` need ``tmap`` to be reduced first."""
    if tmap is not None:
        x = canonical(x, roof, tmap)
    w1 = np.array([x.w1], dtype=np.uint64)
    w2 = np.array([x.w2], dtype=np.uint64)
    return float(phi.evaluate(w1, w2, np.array([x.height]), roof.words(w1, w2))[0])


def infinitesimal_generator_check(phi: SuspensionObservable, x: FlowPoint, roof: RoofFunction, tmap,
                                  h: float = GENERATOR_STEP) -> float:
    """Central difference ``(A(h, x) - A(-h, x)) / 2h``."""
    require_certified(tmap)
    x = canonical(x, roof, tmap)
    v = flow_cocycle_arrays(phi, np.array([h, -h]), [x.w1] * 2, [x.w2] * 2, [x.height] * 2, roof, tmap)
    return float((v[0] - v[1]) / (2.0 * h))


@dataclass(frozen=True)
class PeriodicFlowOrbit:
    base_orbit: PeriodicOrbit
    t_p: float

    def to_dict(self) -> dict:
        return {"base_orbit": self.base_orbit.to_dict(), "t_p": self.t_p}


def periodic_flow_orbit(orbit: PeriodicOrbit, roof: RoofFunction) -> PeriodicFlowOrbit:
    return PeriodicFlowOrbit(orbit, math.fsum(roof.at_rational(p) for p in orbit.points))


def return_error(orbit: PeriodicFlowOrbit, roof: RoofFunction, tmap) -> float:
    """Distance between ``(p, 0)`` and its image after time ``t_p``.

    Both points are pulled back by a quarter of the minimal roof before
    comparing, so an end point just below the roof is not mistaken for a miss.
    """
    start = FlowPoint.at(orbit.base_orbit.representative.to_point())
    end = flow(start, orbit.t_p, roof, tmap)
    back = -0.25 * roof.grid_min()
    a, b = flow(start, back, roof, tmap), flow(end, back, roof, tmap)
    return max(a.base.distance(b.base), abs(a.height - b.height))


def base_reduction(phi: SuspensionObservable, roof: RoofFunction, w1, w2) -> np.ndarray:
    """``F(x) = int_0^{r(x)} phi(x, s) ds``: the flow integral over one fibre."""
    w1 = np.asarray(w1, dtype=np.uint64)
    w2 = np.asarray(w2, dtype=np.uint64)
    r = roof.words(w1, w2)
    return phi.segment_integral(w1, w2, r, np.zeros(r.shape), r)


def flow_orbit_obstruction(phi: SuspensionObservable, orbit: PeriodicFlowOrbit, roof: RoofFunction, tmap=None) -> float:
    """``int_0^{t_p} phi(flow_s p) ds`` as the base Birkhoff sum of fibre integrals.

    The fibre over each rational orbit point is integrated from the exact
    rational coordinates (trigonometric phases reduced mod the denominator),
    so nothing is lost to chaotic error along the cycle.
    """
    total = []
    for p in orbit.base_orbit.points:
        r = roof.at_rational(p)
        for t in phi.terms:
            c = t.base.evaluate_rational(p) * (r ** t.roof_power if t.roof_power else 1.0)
            total.append(c * _profile_integral(t.profile, r))
    return math.fsum(total)


def _profile_integral(profile: HeightProfile, r: float) -> float:
    if profile.is_constant:
        return profile.mean * r
    pieces = max(1, int(math.ceil(r / MAX_SEGMENT)))
    width = r / pieces
    s = ((np.arange(pieces)[:, None] + (_GL_X[None, :] + 1.0) / 2.0) * width).ravel()
    return float(profile(s / r) @ np.tile(_GL_W / 2.0, pieces)) * width


def space_mean(phi: SuspensionObservable, roof: RoofFunction, grid: int = ROOF_GRID) -> float:
    """``int phi dm`` for normalized volume under the roof.

    Uses the base reduction ``int F dx / int r dx`` with the periodic
    trapezoid rule, which is exact for trigonometric integrands of frequency
    below ``grid`` (``F`` is one whenever every roof power is ``>= -1``).
    """
    g = (np.arange(grid, dtype=np.float64) / grid)
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    w1 = np.array([to_fixed(v) for v in x1.ravel()], dtype=np.uint64)
    w2 = np.array([to_fixed(v) for v in x2.ravel()], dtype=np.uint64)
    F = base_reduction(phi, roof, w1, w2)
    return math.fsum(F) / math.fsum(roof.words(w1, w2))


@dataclass
class SuspensionSample:
    w1: np.ndarray
    w2: np.ndarray
    h: np.ndarray
    accepted: int
    proposals: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals


def sample_suspension(roof: RoofFunction, count: int, seed: int, stream: int = 5, threads=None) -> SuspensionSample:
    """Uniform points under the roof by acceptance-rejection on ``base x [0, M)``.

    ``M`` is the rigorous bound ``constant + sum |amplitudes|``.  Each block
    draws from its own generator until it holds its quota, so the sample is
    independent of the thread count.
    """
    top = roof.sup_bound

    def one(i, size):
        rng = block_rng(seed, i, stream)
        parts, got, tried = [], 0, 0
        while got < size:
            a, b = uniform_words(rng, size)
            s = rng.random(size) * top
            ok = s < roof.words(a, b)
            tried += size
            parts.append((a[ok], b[ok], s[ok]))
            got += int(ok.sum())
        a = np.concatenate([p[0] for p in parts])[:size]
        b = np.concatenate([p[1] for p in parts])[:size]
        s = np.concatenate([p[2] for p in parts])[:size]
        return a, b, s, got, tried

    res = map_blocks(one, block_sizes(count), threads)
    return SuspensionSample(np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res]),
                            np.concatenate([r[2] for r in res]), sum(r[3] for r in res), sum(r[4] for r in res))


def flow_clt_report(phi: SuspensionObservable, roof: RoofFunction, tmap, schedule: Sequence[float], count: int,
                    seed: int, thresholds: Sequence[float] = (0.0,), threads=None) -> dict:
    """Variance, KS distance and tails of centered flow integrals ``A(t, x)``.

    The centering ``int phi dm`` comes from deterministic quadrature; the
    Monte-Carlo mean over the sampled start points is reported as a check.
    """
    require_certified(tmap)
    sched = [float(t) for t in schedule]
    if any(t <= 0 for t in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be increasing positive times")
    if count < 1000:
        raise ValueError("count must be >= 1000")
    mean = space_mean(phi, roof)
    pts = sample_suspension(roof, count, seed, threads=threads)
    r0 = roof.words(pts.w1, pts.w2)
    at_start = phi.evaluate(pts.w1, pts.w2, pts.h, r0)
    mc_mean = float(np.mean(at_start))
    mc_se = float(np.std(at_start) / math.sqrt(count))

    bounds = np.cumsum([0] + block_sizes(count))

    def run(i, _):
        sl = slice(bounds[i], bounds[i + 1])
        w1, w2, h = pts.w1[sl], pts.w2[sl], pts.h[sl]
        acc = np.zeros(h.size)
        prev, out = 0.0, []
        for t in sched:
            w1, w2, h, a = _advance(tmap, roof, w1, w2, h, t - prev, phi)
            acc = acc + a
            prev = t
            out.append(acc.copy())
        return out

    res = map_blocks(run, list(range(len(bounds) - 1)), threads)
    rows = []
    for j, t in enumerate(sched):
        vals = np.concatenate([r[j] for r in res]) - mean * t
        s2, se = variance_from_values(vals, t)
        ks = ks_statistic(vals / math.sqrt(s2 * t)) if s2 > 1e-300 else None
        rows.append({"t": t, "sigma_squared": s2, "standard_error": se, "ks_distance": ks,
                     "tails": [{"C": float(c), "fraction": tail_fraction(vals, c)} for c in thresholds]})
    return {
        "count": count,
        "seed": seed,
        "space_mean": mean,
        "mc_mean": mc_mean,
        "mc_mean_standard_error": mc_se,
        "acceptance_rate": pts.acceptance_rate,
        "expected_acceptance_rate": roof.mean / roof.sup_bound,
        "rows": rows,
    }
