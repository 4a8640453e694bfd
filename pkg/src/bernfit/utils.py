"""Seeding and parallel-execution helpers.

Every random draw in the package flows through ``spawn_rng`` so that a
(seed, stream-key) pair fully determines the stream. Work scheduled through
``parallel_map`` reduces in submission order, so results are identical for
any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV_VAR = "BERNFIT_THREADS"


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for stream ``key`` under the master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def resolve_threads(threads: int | None = None) -> int:
    """Thread count from the argument, the environment, or 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map ``fn`` over ``items``, preserving order regardless of thread count."""
    items = list(items)
    threads = min(resolve_threads(threads), max(1, len(items)))
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
