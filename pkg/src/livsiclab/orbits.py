"""Exact periodic points and periodic obstructions of toral automorphisms.

Fixed points of ``T^n`` are the solutions of ``(M^n - I) x in Z^2``.  With a
Smith decomposition ``U A V = diag(d1, d2)`` of ``A = M^n - I`` they are
exactly ``x = V (i/d1, j/d2) mod 1`` for ``0 <= i < d1, 0 <= j < d2``.
Everything here is integer arithmetic; floating point enters only when an
observable is summed over an orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import CapExceededError, LivsicError
from .torus import HyperbolicToralMap, RationalTorusPoint, apply_rational

DEFAULT_CAP = 10 ** 6
ZERO_TOL = 1e-10


def smith_normal_form_2x2(a: int, b: int, c: int, d: int):
    """Return ``(d1, d2, U, V)`` with ``U @ [[a, b], [c, d]] @ V = diag(d1, d2)``.

    ``U`` and ``V`` are unimodular integer matrices (nested tuples), ``d1 | d2``
    and both are nonnegative.
    """
    A = [[a, b], [c, d]]
    U = [[1, 0], [0, 1]]
    V = [[1, 0], [0, 1]]

    def row_op(i, j, q):  # row_i -= q * row_j
        for M in (A, U):
            M[i] = [M[i][0] - q * M[j][0], M[i][1] - q * M[j][1]]

    def col_op(i, j, q):  # col_i -= q * col_j
        for M in (A, V):
            for r in range(2):
                M[r][i] -= q * M[r][j]

    def swap_rows():
        A.reverse()
        U.reverse()

    def swap_cols():
        for M in (A, V):
            for r in range(2):
                M[r][0], M[r][1] = M[r][1], M[r][0]

    while True:
        entries = [(abs(A[i][j]), i, j) for i in range(2) for j in range(2) if A[i][j] != 0]
        if not entries:
            break
        _, i, j = min(entries)
        if i == 1:
            swap_rows()
        if j == 1:
            swap_cols()
        # pivot now at (0, 0); clear its row and column
        done = True
        if A[1][0] != 0:
            q = A[1][0] // A[0][0]
            row_op(1, 0, q)
            done = done and A[1][0] == 0
        if A[0][1] != 0:
            q = A[0][1] // A[0][0]
            col_op(1, 0, q)
            done = done and A[0][1] == 0
        if not done:
            continue
        if A[1][1] % A[0][0] != 0:
            # fold row 1 into row 0 so the pivot picks up the remainder
            row_op(0, 1, -1)
            continue
        break

    for k in range(2):
        if A[k][k] < 0:
            A[k] = [-v for v in A[k]]
            U[k] = [-v for v in U[k]]
    return A[0][0], A[1][1], tuple(map(tuple, U)), tuple(map(tuple, V))


def _require_linear(tmap) -> None:
    if not isinstance(tmap, HyperbolicToralMap):
        raise LivsicError("periodic orbits are enumerated exactly only for linear maps")


def count_period_n_points(tmap: HyperbolicToralMap, n: int) -> int:
    """``|det(M^n - I)|``: the number of solutions of ``T^n x = x``."""
    _require_linear(tmap)
    if n < 1:
        raise ValueError("n must be positive")
    p11, p12, p21, p22 = tmap.power(n)
    return abs((p11 - 1) * (p22 - 1) - p12 * p21)


def enumerate_periodic_points(tmap: HyperbolicToralMap, n: int, cap: int = DEFAULT_CAP):
    """All fixed points of ``T^n`` as exact rationals, each verified by round trip."""
    count = count_period_n_points(tmap, n)
    if count > cap:
        raise CapExceededError(count, cap)
    p11, p12, p21, p22 = tmap.power(n)
    d1, d2, _U, V = smith_normal_form_2x2(p11 - 1, p12, p21, p22 - 1)
    if d1 * d2 != count:
        raise LivsicError(f"Smith form {d1}x{d2} disagrees with determinant {count}")
    step = d2 // d1
    points = []
    for i in range(d1):
        for j in range(d2):
            # x = V (i/d1, j/d2) over common denominator d2
            y1, y2 = i * step, j
            points.append(RationalTorusPoint(V[0][0] * y1 + V[0][1] * y2, V[1][0] * y1 + V[1][1] * y2, d2))
    for p in points:
        q = RationalTorusPoint(p11 * p.n1 + p12 * p.n2, p21 * p.n1 + p22 * p.n2, p.d)
        if q != p:
            raise LivsicError(f"round trip failed for {p}")
    if len(set(points)) != count:
        raise LivsicError("enumeration produced duplicate points")
    return sorted(points)


@dataclass(frozen=True)
class PeriodicOrbit:
    representative: RationalTorusPoint
    period: int
    points: tuple

    def to_dict(self) -> dict:
        return {"period": self.period, "points": [p.as_list() for p in self.points]}

    @classmethod
    def from_dict(cls, data) -> "PeriodicOrbit":
        pts = tuple(RationalTorusPoint(*p) for p in data["points"])
        return cls(pts[0], int(data["period"]), pts)


def orbit_of(tmap: HyperbolicToralMap, p: RationalTorusPoint, max_len: Optional[int] = None) -> PeriodicOrbit:
    pts = [p]
    q = apply_rational(tmap, p)
    while q != p:
        pts.append(q)
        if max_len is not None and len(pts) > max_len:
            raise LivsicError(f"{p} is not periodic with period <= {max_len}")
        q = apply_rational(tmap, q)
    i = min(range(len(pts)), key=lambda j: pts[j].key())
    pts = pts[i:] + pts[:i]
    return PeriodicOrbit(pts[0], len(pts), tuple(pts))


def group_into_orbits(points, tmap: HyperbolicToralMap) -> list[PeriodicOrbit]:
    """Partition fixed points of ``T^n`` into canonical orbits, sorted by (period, rep)."""
    remaining = set(points)
    orbits = []
    for p in sorted(points):
        if p not in remaining:
            continue
        orb = orbit_of(tmap, p, max_len=len(points))
        for q in orb.points:
            if q not in remaining:
                raise LivsicError(f"orbit of {p} leaves the input set")
            remaining.discard(q)
        orbits.append(orb)
    orbits.sort(key=lambda o: (o.period, o.representative.key()))
    return orbits


def orbits_of_period(tmap: HyperbolicToralMap, n: int, cap: int = DEFAULT_CAP) -> list[PeriodicOrbit]:
    """Orbits whose minimal period is exactly ``n``."""
    return [o for o in group_into_orbits(enumerate_periodic_points(tmap, n, cap), tmap) if o.period == n]


def orbits_up_to(tmap: HyperbolicToralMap, n_max: int, cap: int = DEFAULT_CAP) -> list[PeriodicOrbit]:
    total = sum(count_period_n_points(tmap, n) for n in range(1, n_max + 1))
    if total > cap:
        raise CapExceededError(total, cap)
    out = []
    for n in range(1, n_max + 1):
        out.extend(orbits_of_period(tmap, n, cap))
    return out


def orbit_obstruction(phi, orbit: PeriodicOrbit) -> float:
    """``sum of phi over the orbit``, evaluated with exact rational phases."""
    if hasattr(phi, "evaluate_rational"):
        return math.fsum(phi.evaluate_rational(p) for p in orbit.points)
    return math.fsum(float(phi(p.n1 / p.d, p.n2 / p.d)) for p in orbit.points)


def max_obstruction_up_to(phi, tmap: HyperbolicToralMap, n_max: int, cap: int = DEFAULT_CAP, tol: float = ZERO_TOL):
    """``(orbit, value)`` maximizing ``|obstruction|``; ``(None, 0.0)`` if all vanish.

    Ties keep the first orbit in (period, representative) order.
    """
    best, best_val = None, 0.0
    for orb in orbits_up_to(tmap, n_max, cap):
        v = orbit_obstruction(phi, orb)
        if abs(v) > abs(best_val) + 1e-15 or best is None and abs(v) > tol:
            best, best_val = orb, v
    if best is None or abs(best_val) <= tol:
        return None, 0.0
    return best, best_val
