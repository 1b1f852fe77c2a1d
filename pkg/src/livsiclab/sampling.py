"""Deterministic parallel sampling.

Sample counts are cut into fixed-size blocks and block ``i`` draws from its
own stream ``SeedSequence(seed, spawn_key=(stream, i))``.  The partition never
depends on the thread count, and every reduction runs over block outputs in
index order, so results are bit-identical for any pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

BLOCK = 16384

_default_threads: Optional[int] = None

T = TypeVar("T")


def set_default_threads(n: Optional[int]) -> None:
    global _default_threads
    _default_threads = n


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = _default_threads or os.cpu_count() or 1
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return int(threads)


def block_sizes(count: int, block: int = BLOCK) -> list[int]:
    if count < 0:
        raise ValueError("count must be >= 0")
    full, rest = divmod(count, block)
    return [block] * full + ([rest] if rest else [])


def block_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def uniform_words(rng: np.random.Generator, size: int):
    """Uniform lattice points of the torus (uniform on the ``2**-64`` grid)."""
    w = rng.integers(0, np.iinfo(np.uint64).max, size=(2, size), dtype=np.uint64, endpoint=True)
    return w[0].copy(), w[1].copy()


def map_blocks(fn: Callable[[int, T], object], items: Sequence[T], threads: Optional[int] = None) -> list:
    """``[fn(i, item) for i, item in enumerate(items)]``, possibly on a thread pool."""
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(i, it) for i, it in enumerate(items)]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        futures = [pool.submit(fn, i, it) for i, it in enumerate(items)]
        return [f.result() for f in futures]
