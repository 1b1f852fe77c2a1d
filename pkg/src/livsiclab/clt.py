"""Monte-Carlo Central Limit Theorem checks for Birkhoff sums.

Start points are uniform on the torus (the invariant volume), drawn block by
block with :mod:`livsiclab.sampling`; every statistic below is a deterministic
function of ``(phi, map, n, count, seed)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .observables import TrigObservable, normalize_zero_mean
from .sampling import block_rng, block_sizes, map_blocks, uniform_words
from .torus import HyperbolicToralMap, require_certified

MIN_COUNT = 1000
DEFAULT_LAGS = 16


class _Block:
    __slots__ = ("w1", "w2", "sums", "phi0", "lagsum", "steps")

    def __init__(self, w1, w2):
        self.w1, self.w2 = w1, w2
        self.sums = np.zeros(w1.shape)
        self.phi0 = None
        self.lagsum = np.zeros(w1.shape)
        self.steps = 0


class BirkhoffEnsemble:
    """Birkhoff sums ``phi_k`` advanced in lockstep from uniform start points.

    ``lags`` > 0 additionally accumulates ``phi(x) * phi(T^j x)`` for
    ``1 <= j < lags``, which feeds the autocorrelation variance estimator.
    """

    def __init__(self, phi: TrigObservable, tmap, count: int, seed: int, *,
                 stream: int = 0, lags: int = 0, threads: Optional[int] = None):
        require_certified(tmap)
        self.phi, self.tmap = phi, tmap
        self.count, self.seed, self.lags, self.threads = int(count), int(seed), int(lags), threads
        self.blocks = []
        for i, size in enumerate(block_sizes(self.count)):
            self.blocks.append(_Block(*uniform_words(block_rng(seed, i, stream), size)))

    @property
    def steps(self) -> int:
        return self.blocks[0].steps if self.blocks else 0

    def _advance_block(self, blk: _Block, steps: int, thresholds):
        phi, tmap = self.phi, self.tmap
        tail = None if thresholds is None else np.zeros((steps, len(thresholds)), dtype=np.int64)
        for j in range(steps):
            v = phi.evaluate_words(blk.w1, blk.w2)
            if blk.steps == 0:
                blk.phi0 = v.copy()
            elif blk.steps < self.lags:
                blk.lagsum += blk.phi0 * v
            blk.sums += v
            blk.w1, blk.w2 = tmap.step(blk.w1, blk.w2)
            blk.steps += 1
            if tail is not None:
                for c, C in enumerate(thresholds):
                    tail[j, c] = np.count_nonzero(blk.sums > C)
        return tail

    def advance(self, steps: int, thresholds: Optional[Sequence[float]] = None):
        """Run ``steps`` more iterations.

        With ``thresholds``, returns an integer array ``(steps, len(thresholds))``
        counting start points with ``phi_k > C`` after each step (strict).
        """
        tails = map_blocks(lambda i, b: self._advance_block(b, steps, thresholds), self.blocks, self.threads)
        if thresholds is None:
            return None
        return np.sum(tails, axis=0)

    def values(self) -> np.ndarray:
        return np.concatenate([b.sums for b in self.blocks]) if self.blocks else np.zeros(0)

    def autocorrelation_terms(self) -> np.ndarray:
        """Per-sample ``phi(x) * (phi(x) + 2 sum_{1<=j<lags} phi(T^j x))``."""
        parts = [b.phi0 * b.phi0 + 2.0 * b.lagsum for b in self.blocks]
        return np.concatenate(parts)


@dataclass(frozen=True)
class CltSample:
    n: int
    values: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        if len(self.values) < MIN_COUNT:
            raise ValueError(f"need at least {MIN_COUNT} samples for statistics")


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_squared: float
    n_used: int
    standard_error: float
    autocorr_sigma_squared: float = math.nan
    autocorr_standard_error: float = math.nan
    lags: int = 0

    @property
    def discrepancy_in_se(self) -> float:
        se = math.hypot(self.standard_error, self.autocorr_standard_error)
        diff = abs(self.sigma_squared - self.autocorr_sigma_squared)
        if se == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return diff / se

    @property
    def estimators_agree(self) -> bool:
        return self.discrepancy_in_se <= 5.0

    def to_dict(self) -> dict:
        return {
            "sigma_squared": self.sigma_squared,
            "n_used": self.n_used,
            "standard_error": self.standard_error,
            "autocorr_sigma_squared": self.autocorr_sigma_squared,
            "autocorr_standard_error": self.autocorr_standard_error,
            "lags": self.lags,
            "discrepancy_in_se": self.discrepancy_in_se,
        }


def _check_count(count: int):
    if count < MIN_COUNT:
        raise ValueError(f"count must be >= {MIN_COUNT}")


def sample_birkhoff(phi, tmap, n: int, count: int, seed: int, threads=None) -> CltSample:
    """``count`` Birkhoff sums ``phi_n`` of the centered observable."""
    _check_count(count)
    ens = BirkhoffEnsemble(normalize_zero_mean(phi), tmap, count, seed, threads=threads)
    ens.advance(n)
    return CltSample(n, ens.values(), seed)


def variance_from_values(values: np.ndarray, n: int) -> tuple[float, float]:
    """``(mean(S^2)/n, standard error)`` with the error from the fourth moment."""
    sq = values * values
    m2 = float(np.mean(sq))
    m4 = float(np.mean(sq * sq))
    se = math.sqrt(max(m4 - m2 * m2, 0.0) / len(values)) / n
    return m2 / n, se


def _autocorr(terms: np.ndarray) -> tuple[float, float]:
    return float(np.mean(terms)), float(np.std(terms) / math.sqrt(len(terms)))


def estimate_variance(phi, tmap, n: int, count: int, seed: int, lags: int = DEFAULT_LAGS, threads=None) -> VarianceEstimate:
    _check_count(count)
    lags = max(1, min(lags, n))
    ens = BirkhoffEnsemble(normalize_zero_mean(phi), tmap, count, seed, lags=lags, threads=threads)
    ens.advance(n)
    s2, se = variance_from_values(ens.values(), n)
    ac, ac_se = _autocorr(ens.autocorrelation_terms())
    est = VarianceEstimate(s2, n, se, ac, ac_se, lags)
    if not est.estimators_agree:
        warnings.warn(
            f"variance estimators disagree by {est.discrepancy_in_se:.1f} standard errors "
            f"({s2:.6g} vs {ac:.6g})", RuntimeWarning, stacklevel=2,
        )
    return est


def normal_cdf(z):
    return ndtr(z)


def ks_statistic(z: np.ndarray) -> float:
    """Kolmogorov-Smirnov sup-distance of the sample ``z`` from N(0, 1)."""
    z = np.sort(np.asarray(z, dtype=np.float64))
    m = len(z)
    if m == 0:
        raise ValueError("empty sample")
    F = normal_cdf(z)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ks_distance(sample: CltSample, sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return ks_statistic(sample.values / (sigma * math.sqrt(sample.n)))


def tail_fraction(values: np.ndarray, C: float) -> float:
    """Empirical ``m{phi_n > C}`` (strict inequality)."""
    return float(np.count_nonzero(values > C)) / len(values)


def clt_report(phi, tmap, schedule: Sequence[int], count: int, seed: int,
               thresholds: Sequence[float] = (0.0,), lags: int = DEFAULT_LAGS, threads=None) -> dict:
    """Per-``n`` variance, KS distance and tail fractions from one ensemble pass.

    Every ``n`` in ``schedule`` is a checkpoint of the same trajectories, so a
    table entry equals what :func:`sample_birkhoff` returns for that ``n`` and
    seed, bit for bit.
    """
    _check_count(count)
    schedule = sorted(int(n) for n in schedule)
    if not schedule or schedule[0] < 1:
        raise ValueError("schedule must contain positive step counts")
    lags = max(1, min(lags, schedule[0]))
    centered = normalize_zero_mean(phi)
    ens = BirkhoffEnsemble(centered, tmap, count, seed, lags=lags, threads=threads)
    rows = []
    for n in schedule:
        ens.advance(n - ens.steps)
        vals = ens.values()
        s2, se = variance_from_values(vals, n)
        ks = ks_statistic(vals / math.sqrt(s2 * n)) if s2 > 1e-300 else None
        rows.append({
            "n": n,
            "sigma_squared": s2,
            "standard_error": se,
            "ks_distance": ks,
            "tails": [{"C": float(C), "fraction": tail_fraction(vals, C)} for C in thresholds],
        })
    ac, ac_se = _autocorr(ens.autocorrelation_terms())
    return {
        "count": count,
        "seed": seed,
        "lags": lags,
        "autocorr_sigma_squared": ac,
        "autocorr_standard_error": ac_se,
        "empirical_only": not isinstance(tmap, HyperbolicToralMap),
        "observable_mean_removed": phi.mean,
        "rows": rows,
    }


def gaussian_tail(alpha: float) -> float:
    """``P(Z > alpha)`` for standard normal ``Z``."""
    return float(ndtr(-alpha))
