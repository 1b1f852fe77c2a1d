"""Orbit-based solution of the cohomological equation ``phi = Phi o T - Phi``.

Along one long orbit the only candidate is ``Phi(T^k x0) = phi_k(x0)`` with
``Phi(x0) = 0``.  Those values are binned into an ``R x R`` grid; cell means
give a reconstruction and cell spreads show whether the values are
consistent with a continuous function.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientCoverageError
from .observables import TrigObservable
from .sampling import block_rng, uniform_words
from .torus import TorusPoint, orbit_words, require_certified, words_to_unit

COVERAGE_THRESHOLD = 0.99


def random_start(seed: int) -> TorusPoint:
    """Seeded uniform start point (a.e. point has a dense orbit)."""
    w1, w2 = uniform_words(block_rng(seed, 0, stream=7), 1)
    return TorusPoint.from_words(int(w1[0]), int(w2[0]))


def cell_index(x1: np.ndarray, x2: np.ndarray, resolution: int) -> np.ndarray:
    c1 = np.minimum((x1 * resolution).astype(np.int64), resolution - 1)
    c2 = np.minimum((x2 * resolution).astype(np.int64), resolution - 1)
    return c1 * resolution + c2


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell statistics of a transfer function on an ``R x R`` grid.

    ``sums`` holds exact rationals so that :func:`merge_grids` is associative
    and order independent; unvisited cells have ``visits == 0`` and NaN
    value/spread.
    """

    resolution: int
    sums: np.ndarray     # object array of Fraction, shape (R, R)
    visits: np.ndarray   # int64, shape (R, R)
    mins: np.ndarray
    maxs: np.ndarray
    anchor: TorusPoint

    @property
    def visited(self) -> np.ndarray:
        return self.visits > 0

    @property
    def coverage(self) -> float:
        return float(np.count_nonzero(self.visited)) / self.visits.size

    @cached_property
    def values(self) -> np.ndarray:
        out = np.full(self.visits.shape, np.nan)
        for idx in zip(*np.nonzero(self.visited)):
            out[idx] = float(self.sums[idx] / int(self.visits[idx]))
        return out

    @property
    def spread(self) -> np.ndarray:
        return np.where(self.visited, self.maxs - self.mins, np.nan)

    @property
    def max_spread(self) -> float:
        s = self.spread
        return float(np.nanmax(s)) if self.visited.any() else 0.0

    def cell_centers(self):
        c = (np.arange(self.resolution) + 0.5) / self.resolution
        return np.meshgrid(c, c, indexing="ij")

    def lookup(self, x1, x2) -> np.ndarray:
        idx = cell_index(np.asarray(x1), np.asarray(x2), self.resolution)
        return self.values.ravel()[idx]

    def shifted(self, c: float) -> "GridFunction":
        """Add the constant ``c`` to every visited value."""
        fc = Fraction(c)
        sums = np.empty_like(self.sums)
        for idx in np.ndindex(self.sums.shape):
            sums[idx] = self.sums[idx] + fc * int(self.visits[idx])
        return GridFunction(self.resolution, sums, self.visits.copy(), self.mins + c, self.maxs + c, self.anchor)

    def to_dict(self) -> dict:
        vals, spr = self.values, self.spread
        cells = []
        for i in range(self.resolution):
            row = []
            for j in range(self.resolution):
                if self.visits[i, j]:
                    row.append({"value": float(vals[i, j]), "visits": int(self.visits[i, j]), "spread": float(spr[i, j])})
                else:
                    row.append(None)
            cells.append(row)
        return {
            "resolution": self.resolution,
            "anchor": [self.anchor.x1, self.anchor.x2],
            "coverage": self.coverage,
            "max_spread": self.max_spread,
            "cells": cells,
        }


def _empty_grid(resolution: int, anchor: TorusPoint) -> GridFunction:
    sums = np.empty((resolution, resolution), dtype=object)
    sums.fill(Fraction(0))
    return GridFunction(
        resolution, sums, np.zeros((resolution, resolution), dtype=np.int64),
        np.full((resolution, resolution), np.inf), np.full((resolution, resolution), -np.inf), anchor,
    )


def grid_from_samples(x1: np.ndarray, x2: np.ndarray, values: np.ndarray, resolution: int, anchor: TorusPoint) -> GridFunction:
    r2 = resolution * resolution
    idx = cell_index(x1, x2, resolution)
    visits = np.bincount(idx, minlength=r2)
    fsums = np.bincount(idx, weights=values, minlength=r2)
    mins = np.full(r2, np.inf)
    maxs = np.full(r2, -np.inf)
    np.minimum.at(mins, idx, values)
    np.maximum.at(maxs, idx, values)
    sums = np.array([Fraction(float(s)) for s in fsums], dtype=object)
    shape = (resolution, resolution)
    return GridFunction(resolution, sums.reshape(shape), visits.reshape(shape).astype(np.int64),
                        mins.reshape(shape), maxs.reshape(shape), anchor)


def solve_on_orbit(phi: TrigObservable, tmap, x0: TorusPoint, n_steps: int, resolution: int,
                   coverage_threshold: float = COVERAGE_THRESHOLD) -> GridFunction:
    """Bin ``Phi(T^k x0) = phi_k(x0)``, ``0 <= k < n_steps``, onto the grid."""
    require_certified(tmap)
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if n_steps < 10 * resolution * resolution:
        raise ValueError(f"n_steps must be >= 10 * resolution^2 = {10 * resolution * resolution}")
    w1, w2 = orbit_words(tmap, x0, n_steps)
    phis = phi.evaluate_words(w1, w2)
    values = np.empty(n_steps)
    values[0] = 0.0
    np.cumsum(phis[:-1], out=values[1:])
    grid = grid_from_samples(words_to_unit(w1), words_to_unit(w2), values, resolution, x0)
    if grid.coverage < coverage_threshold:
        warnings.warn(
            f"orbit visited only {grid.coverage:.1%} of cells; re-seed or increase n_steps",
            RuntimeWarning, stacklevel=2,
        )
    return grid


def merge_grids(grids: Sequence[GridFunction]) -> GridFunction:
    """Visit-weighted merge of grids that share an additive normalization."""
    if not grids:
        raise ValueError("nothing to merge")
    R = grids[0].resolution
    if any(g.resolution != R for g in grids):
        raise ValueError("grids must share a resolution")
    sums = np.empty((R, R), dtype=object)
    for idx in np.ndindex(R, R):
        sums[idx] = sum((g.sums[idx] for g in grids), Fraction(0))
    return GridFunction(
        R, sums,
        np.sum([g.visits for g in grids], axis=0),
        np.minimum.reduce([g.mins for g in grids]),
        np.maximum.reduce([g.maxs for g in grids]),
        grids[0].anchor,
    )


def offset_between(a: GridFunction, b: GridFunction) -> float:
    """Constant ``c`` minimizing the visit-weighted gap between ``a`` and ``b + c``."""
    both = a.visited & b.visited
    if not both.any():
        raise InsufficientCoverageError("grids share no visited cell")
    w = np.minimum(a.visits, b.visits)[both].astype(np.float64)
    d = (a.values - b.values)[both]
    return float(np.sum(w * d) / np.sum(w))


@dataclass(frozen=True)
class Residual:
    residual: float
    noise_floor: float
    lipschitz_bound: float
    samples_used: int

    @property
    def at_noise_floor(self) -> bool:
        return self.residual <= self.noise_floor

    def to_dict(self) -> dict:
        return {"residual": self.residual, "noise_floor": self.noise_floor,
                "lipschitz_bound": self.lipschitz_bound, "samples_used": self.samples_used,
                "at_noise_floor": self.at_noise_floor}


def coboundary_residual(Phi: GridFunction, phi: TrigObservable, tmap, samples: int = 10000, seed: int = 0,
                        lipschitz_bound: Optional[float] = None) -> Residual:
    """``sup |Phi(Tx) - Phi(x) - phi(x)|`` over sampled points, using cell means.

    The noise floor is two cell-quantization errors, ``2 sqrt(2) L / R + 1e-6``,
    with ``L`` bounding the Lipschitz norm of the true transfer function
    (``lipschitz_norm(phi)`` unless supplied).
    """
    if Phi.coverage < COVERAGE_THRESHOLD:
        raise InsufficientCoverageError(f"coverage {Phi.coverage:.1%} is below {COVERAGE_THRESHOLD:.0%}")
    w1, w2 = uniform_words(block_rng(seed, 0, stream=11), samples)
    t1, t2 = tmap.step(w1, w2)
    vals = Phi.values.ravel()
    R = Phi.resolution
    here = vals[cell_index(words_to_unit(w1), words_to_unit(w2), R)]
    there = vals[cell_index(words_to_unit(t1), words_to_unit(t2), R)]
    res = there - here - phi.evaluate_words(w1, w2)
    ok = np.isfinite(res)
    L = phi.lipschitz_norm() if lipschitz_bound is None else float(lipschitz_bound)
    floor = 2.0 * math.sqrt(2.0) * L / R + 1e-6
    return Residual(float(np.max(np.abs(res[ok]))) if ok.any() else 0.0, floor, L, int(np.count_nonzero(ok)))


class Verdict(str, enum.Enum):
    COBOUNDARY_LIKE = "COBOUNDARY_LIKE"
    DIVERGENT = "DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class MeasurableVerdict:
    verdict: Verdict
    schedule: tuple
    percentiles: tuple
    growth_ratio: float
    sqrt_ratio: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "schedule": list(self.schedule),
                "percentiles": list(self.percentiles), "growth_ratio": self.growth_ratio,
                "sqrt_ratio": self.sqrt_ratio}


def measurable_solution_test(phi: TrigObservable, tmap, sample_count: int,
                             n_schedule: Sequence[int] = (100, 1000, 10000), seed: int = 0,
                             quantile: float = 0.95, threads=None) -> MeasurableVerdict:
    """Tightness test of ``|phi_n|`` along an increasing schedule.

    Bounded 95th percentile (growth <= 2) is what a measurable solution
    forces; growth within a factor 2 of ``sqrt(n_last / n_first)`` is CLT
    scaling.
    """
    from .clt import BirkhoffEnsemble

    schedule = tuple(int(n) for n in n_schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] < 1:
        raise ValueError("n_schedule must be strictly increasing positive integers")
    ens = BirkhoffEnsemble(phi, tmap, sample_count, seed, stream=3, threads=threads)
    qs = []
    for n in schedule:
        ens.advance(n - ens.steps)
        qs.append(float(np.quantile(np.abs(ens.values()), quantile)))
    first, last = qs[0], qs[-1]
    sqrt_ratio = math.sqrt(schedule[-1] / schedule[0])
    if last <= 1e-12:
        ratio = 0.0 if first <= 1e-12 else last / first
    else:
        ratio = last / first if first > 0 else math.inf
    if ratio <= 2.0:
        verdict = Verdict.COBOUNDARY_LIKE
    elif 0.5 <= ratio / sqrt_ratio <= 2.0:
        verdict = Verdict.DIVERGENT
    else:
        verdict = Verdict.INCONCLUSIVE
    return MeasurableVerdict(verdict, schedule, tuple(qs), ratio, sqrt_ratio)
