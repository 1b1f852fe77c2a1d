"""Volume-preserving Anosov maps of the 2-torus.

Points are carried internally on the fixed-point lattice ``2**-64 * Z^2`` as
pairs of ``uint64`` words; the torus group law is then plain wrap-around
integer arithmetic.  Unimodular matrices act on this lattice bijectively and
exactly, so forward and backward orbits of linear maps carry no rounding
error at all.  A float :class:`TorusPoint` enters the lattice exactly (every
double in ``[2**-11, 1)`` is a lattice point) and leaves it with a single
rounding.

Sheared maps ``x -> S(Mx)`` with ``S(y1, y2) = (y1 + a*g(y2), y2)`` act on the
lattice as ``(Y1 + q(Y2), Y2)`` where ``q`` is the fixed-point rounding of the
shift.  This is still an exact bijection of the lattice (the inverse subtracts
the same ``q``), which keeps the discrete dynamics area preserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import LivsicError, NotCertifiedError

WORD = 1 << 64
MASK = WORD - 1
UNIT = 2.0 ** -64


def to_fixed(x: float) -> int:
    """Lattice word for a coordinate; exact for doubles in ``[2**-11, 1)``."""
    x = float(x) % 1.0
    return int(x * WORD) & MASK


def from_fixed(word: int) -> float:
    x = float(word) * UNIT
    return 0.0 if x >= 1.0 else x


def words_to_unit(words: np.ndarray) -> np.ndarray:
    """Float coordinates in ``[0, 1)`` for an array of lattice words."""
    x = words.astype(np.float64) * UNIT
    x[x >= 1.0] = 0.0
    return x


def unit_to_words(x: np.ndarray) -> np.ndarray:
    frac = np.asarray(x, dtype=np.float64) % 1.0
    frac = np.where(frac >= 1.0, 0.0, frac)
    return (frac * float(WORD)).astype(np.uint64)


def _word(m: int) -> np.uint64:
    return np.uint64(int(m) % WORD)


@dataclass(frozen=True)
class TorusPoint:
    """A point of ``[0, 1)^2``; coordinates are reduced mod 1 on construction."""

    x1: float
    x2: float

    def __post_init__(self):
        for name in ("x1", "x2"):
            v = float(getattr(self, name)) % 1.0
            object.__setattr__(self, name, 0.0 if v >= 1.0 else v)

    def words(self) -> tuple[int, int]:
        return to_fixed(self.x1), to_fixed(self.x2)

    @classmethod
    def from_words(cls, w1: int, w2: int) -> "TorusPoint":
        return cls(from_fixed(w1), from_fixed(w2))

    def distance(self, other: "TorusPoint") -> float:
        """Sup-norm distance on the torus."""
        d1 = abs(self.x1 - other.x1)
        d2 = abs(self.x2 - other.x2)
        return max(min(d1, 1.0 - d1), min(d2, 1.0 - d2))


@dataclass(frozen=True, order=False)
class RationalTorusPoint:
    """The point ``(n1/d, n2/d) mod 1`` with ``d`` minimal."""

    n1: int
    n2: int
    d: int

    def __post_init__(self):
        d = int(self.d)
        if d <= 0:
            raise ValueError(f"denominator must be positive, got {d}")
        n1, n2 = int(self.n1) % d, int(self.n2) % d
        g = math.gcd(math.gcd(n1, n2), d)
        object.__setattr__(self, "n1", n1 // g)
        object.__setattr__(self, "n2", n2 // g)
        object.__setattr__(self, "d", d // g)

    def key(self) -> tuple[Fraction, Fraction]:
        return Fraction(self.n1, self.d), Fraction(self.n2, self.d)

    def __lt__(self, other: "RationalTorusPoint") -> bool:
        return self.key() < other.key()

    def to_point(self) -> TorusPoint:
        return TorusPoint(self.n1 / self.d, self.n2 / self.d)

    def as_list(self) -> list[int]:
        return [self.n1, self.n2, self.d]


@dataclass(frozen=True)
class HyperbolicToralMap:
    """Linear automorphism ``x -> Mx mod 1`` with ``det M = 1`` and ``|tr M| >= 3``."""

    m11: int
    m12: int
    m21: int
    m22: int

    is_linear = True

    def __post_init__(self):
        for name in ("m11", "m12", "m21", "m22"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValueError(f"matrix entry {name}={v!r} is not an integer")
            object.__setattr__(self, name, int(v))
        if self.det != 1:
            raise ValueError(f"determinant must be +1, got {self.det}")
        if abs(self.trace) < 3:
            raise ValueError(f"|trace| must be >= 3 for hyperbolicity, got {self.trace}")

    @classmethod
    def from_matrix(cls, matrix) -> "HyperbolicToralMap":
        (a, b), (c, d) = matrix
        return cls(a, b, c, d)

    @property
    def det(self) -> int:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> int:
        return self.m11 + self.m22

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=np.int64)

    def as_lists(self) -> list[list[int]]:
        return [[self.m11, self.m12], [self.m21, self.m22]]

    def inverse(self) -> "HyperbolicToralMap":
        return HyperbolicToralMap(self.m22, -self.m12, -self.m21, self.m11)

    def power(self, n: int) -> tuple[int, int, int, int]:
        """Exact integer entries of ``M**n`` (negative ``n`` uses the inverse)."""
        base = self if n >= 0 else self.inverse()
        n = abs(n)
        r = (1, 0, 0, 1)
        b = (base.m11, base.m12, base.m21, base.m22)
        while n:
            if n & 1:
                r = _matmul(r, b)
            b = _matmul(b, b)
            n >>= 1
        return r

    def eigen(self):
        """``(lambda_u, e_u, e_s)``: expanding eigenvalue and unit eigenvectors."""
        tr = float(self.trace)
        disc = math.sqrt(tr * tr - 4.0)
        lam_u = (tr + math.copysign(disc, tr)) / 2.0
        lam_s = 1.0 / lam_u
        return lam_u, self._eigvec(lam_u), self._eigvec(lam_s)

    def _eigvec(self, lam: float) -> np.ndarray:
        v1 = np.array([float(self.m12), lam - self.m11])
        v2 = np.array([lam - self.m22, float(self.m21)])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        return v / np.linalg.norm(v)

    # lattice action

    def step(self, w1: np.ndarray, w2: np.ndarray):
        a, b, c, d = (_word(m) for m in (self.m11, self.m12, self.m21, self.m22))
        return a * w1 + b * w2, c * w1 + d * w2

    def step_inverse(self, w1: np.ndarray, w2: np.ndarray):
        return self.inverse().step(w1, w2)

    def step_power(self, w1: np.ndarray, w2: np.ndarray, n: int):
        a, b, c, d = (_word(m) for m in self.power(n))
        return a * w1 + b * w2, c * w1 + d * w2

    def step_int(self, w1: int, w2: int) -> tuple[int, int]:
        return (self.m11 * w1 + self.m12 * w2) & MASK, (self.m21 * w1 + self.m22 * w2) & MASK

    def step_inverse_int(self, w1: int, w2: int) -> tuple[int, int]:
        return (self.m22 * w1 - self.m12 * w2) & MASK, (-self.m21 * w1 + self.m11 * w2) & MASK


def _matmul(p, q):
    a, b, c, d = p
    e, f, g, h = q
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


@dataclass(frozen=True)
class ConeCertificate:
    cone_slope: float
    expansion_lower_bound: float
    grid_resolution: int
    verified: bool
    worst_expansion: float
    failing_point: Optional[tuple[float, float]] = None
    failure_reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "cone_slope": self.cone_slope,
            "expansion_lower_bound": self.expansion_lower_bound,
            "grid_resolution": self.grid_resolution,
            "verified": self.verified,
            "worst_expansion": self.worst_expansion,
            "failing_point": list(self.failing_point) if self.failing_point else None,
            "failure_reason": self.failure_reason,
        }


@dataclass(frozen=True)
class ShearedMap:
    """``x -> S(Mx)`` with the area-preserving shear ``S(y) = (y1 + a*g(y2), y2)``.

    ``shear_profile`` is a trigonometric observable depending on ``x2`` only.
    """

    base: HyperbolicToralMap
    amplitude: float
    shear_profile: object
    certificate: Optional[ConeCertificate] = field(default=None, compare=False)

    is_linear = False

    def __post_init__(self):
        object.__setattr__(self, "amplitude", float(self.amplitude))
        for (k1, _k2) in self.shear_profile.terms:
            if k1 != 0:
                raise ValueError("shear profile must depend on x2 only (all k1 == 0)")

    def shift(self, y2: np.ndarray) -> np.ndarray:
        zeros = np.zeros_like(y2)
        return self.amplitude * self.shear_profile(zeros, y2)

    def shift_slope(self, y2: np.ndarray) -> np.ndarray:
        zeros = np.zeros_like(y2)
        return self.amplitude * self.shear_profile.gradient(zeros, y2)[1]

    def _shift_words(self, w2: np.ndarray) -> np.ndarray:
        return unit_to_words(self.shift(words_to_unit(w2)))

    def step(self, w1: np.ndarray, w2: np.ndarray):
        y1, y2 = self.base.step(w1, w2)
        return y1 + self._shift_words(y2), y2

    def step_inverse(self, w1: np.ndarray, w2: np.ndarray):
        y1 = w1 - self._shift_words(w2)
        return self.base.step_inverse(y1, w2)

    def step_int(self, w1: int, w2: int) -> tuple[int, int]:
        a, b = self.step(np.array([w1], dtype=np.uint64), np.array([w2], dtype=np.uint64))
        return int(a[0]), int(b[0])

    def step_inverse_int(self, w1: int, w2: int) -> tuple[int, int]:
        a, b = self.step_inverse(np.array([w1], dtype=np.uint64), np.array([w2], dtype=np.uint64))
        return int(a[0]), int(b[0])

    def step_power(self, w1, w2, n: int):
        fwd = self.step if n >= 0 else self.step_inverse
        for _ in range(abs(n)):
            w1, w2 = fwd(w1, w2)
        return w1, w2

    def certified(self, cone_slope=0.5, expansion=1.5, resolution=64) -> "ShearedMap":
        """Return a copy carrying a verified certificate, or raise."""
        cert = verify_cone_condition(self, cone_slope, expansion, resolution)
        if not cert.verified:
            raise NotCertifiedError(
                f"cone condition fails at {cert.failing_point}: {cert.failure_reason}"
            )
        return replace(self, certificate=cert)


def require_certified(tmap) -> None:
    """Gate used by every experiment entry point."""
    if isinstance(tmap, ShearedMap):
        if tmap.certificate is None or not tmap.certificate.verified:
            raise NotCertifiedError("sheared map has no verified cone certificate")
    elif not isinstance(tmap, HyperbolicToralMap):
        raise TypeError(f"not a torus map: {tmap!r}")


def apply(tmap, x: TorusPoint) -> TorusPoint:
    return TorusPoint.from_words(*tmap.step_int(*x.words()))


def apply_inverse(tmap, x: TorusPoint) -> TorusPoint:
    return TorusPoint.from_words(*tmap.step_inverse_int(*x.words()))


def apply_rational(tmap, p: RationalTorusPoint) -> RationalTorusPoint:
    if not isinstance(tmap, HyperbolicToralMap):
        raise LivsicError("apply_rational requires a linear map; shears do not preserve rationals")
    return RationalTorusPoint(
        tmap.m11 * p.n1 + tmap.m12 * p.n2, tmap.m21 * p.n1 + tmap.m22 * p.n2, p.d
    )


def iterate(tmap, x: TorusPoint, n: int) -> list[TorusPoint]:
    """``[x, T(x), ..., T^n(x)]``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    w1, w2 = x.words()
    out = [x]
    for _ in range(n):
        w1, w2 = tmap.step_int(w1, w2)
        out.append(TorusPoint.from_words(w1, w2))
    return out


def orbit_words(tmap, x: TorusPoint, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Lattice words of ``x, T(x), ..., T^(n-1)(x)`` as two ``uint64`` arrays.

    Linear maps fill the orbit by doubling: block ``[s, 2s)`` is ``M**s``
    applied to block ``[0, s)``, so only ``log2(n)`` vector operations run.
    """
    w1 = np.zeros(n, dtype=np.uint64)
    w2 = np.zeros(n, dtype=np.uint64)
    if n == 0:
        return w1, w2
    w1[0], w2[0] = x.words()
    if isinstance(tmap, HyperbolicToralMap):
        s = 1
        while s < n:
            m = min(s, n - s)
            w1[s:s + m], w2[s:s + m] = tmap.step_power(w1[:m], w2[:m], s)
            s *= 2
        return w1, w2
    a, b = int(w1[0]), int(w2[0])
    for i in range(1, n):
        a, b = tmap.step_int(a, b)
        w1[i], w2[i] = a, b
    return w1, w2


def verify_cone_condition(tmap, cone_slope: float, expansion: float, resolution: int) -> ConeCertificate:
    """Check an unstable-cone field on a ``resolution x resolution`` grid.

    The cone is ``{a*e_u + b*e_s : |b| <= cone_slope*|a|}`` in the eigenbasis of
    the linear part.  At each grid point the differential must map both
    boundary rays strictly inside the cone (on the same side), and every cone
    vector must be stretched by at least ``expansion``; the minimum stretch
    over the cone is found exactly from the critical points of a ratio of
    quadratics.
    """
    if resolution < 16:
        raise ValueError("resolution must be >= 16")
    if cone_slope <= 0:
        raise ValueError("cone_slope must be positive")
    if expansion <= 1:
        raise ValueError("expansion lower bound must exceed 1")
    base = tmap.base if isinstance(tmap, ShearedMap) else tmap
    _, e_u, e_s = base.eigen()
    basis_inv = np.linalg.inv(np.column_stack([e_u, e_s]))
    M = base.matrix.astype(np.float64)

    g = np.arange(resolution) / resolution
    x1, x2 = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    y2 = (M[1, 0] * x1 + M[1, 1] * x2) % 1.0
    if isinstance(tmap, ShearedMap):
        slope = tmap.shift_slope(y2)
    else:
        slope = np.zeros_like(y2)
    # DG = [[1, slope], [0, 1]] @ M, as four arrays
    d11 = M[0, 0] + slope * M[1, 0]
    d12 = M[0, 1] + slope * M[1, 1]
    d21 = np.full_like(slope, M[1, 0])
    d22 = np.full_like(slope, M[1, 1])

    def image(v):
        return d11 * v[0] + d12 * v[1], d21 * v[0] + d22 * v[1]

    s = float(cone_slope)
    ok = np.ones(x1.shape, dtype=bool)
    signs = []
    for sign in (1.0, -1.0):
        w = image(e_u + sign * s * e_s)
        a = basis_inv[0, 0] * w[0] + basis_inv[0, 1] * w[1]
        b = basis_inv[1, 0] * w[0] + basis_inv[1, 1] * w[1]
        ok &= np.abs(b) < s * np.abs(a)
        signs.append(np.sign(a))
    ok &= signs[0] == signs[1]

    # stretch ratio f(t) = |DG(e_u + t e_s)|^2 / |e_u + t e_s|^2, t in [-s, s]
    ue, se = image(e_u), image(e_s)
    alpha = se[0] ** 2 + se[1] ** 2
    beta = 2.0 * (ue[0] * se[0] + ue[1] * se[1])
    gamma = ue[0] ** 2 + ue[1] ** 2
    delta, eps, zeta = 1.0, 2.0 * float(e_u @ e_s), 1.0

    def ratio(t):
        return (alpha * t * t + beta * t + gamma) / (delta * t * t + eps * t + zeta)

    best = np.minimum(ratio(-s), ratio(s))
    qa = alpha * eps - beta * delta
    qb = 2.0 * (alpha * zeta - gamma * delta)
    qc = beta * zeta - gamma * eps
    disc = qb * qb - 4.0 * qa * qc
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
        for t in ((-qb + root) / (2 * qa), (-qb - root) / (2 * qa), -qc / qb):
            inside = np.isfinite(t) & (np.abs(t) <= s)
            best = np.where(inside, np.minimum(best, ratio(np.where(inside, t, 0.0))), best)
    stretch = np.sqrt(best)
    ok_exp = stretch >= expansion
    worst = float(stretch.min())

    good = ok & ok_exp
    if good.all():
        return ConeCertificate(s, float(expansion), resolution, True, worst)
    i = int(np.argmin(good))
    reason = "cone not mapped strictly inside itself" if not ok[i] else (
        f"stretch {stretch[i]:.6g} below required {expansion:.6g}"
    )
    return ConeCertificate(
        s, float(expansion), resolution, False, worst, (float(x1[i]), float(x2[i])), reason
    )
