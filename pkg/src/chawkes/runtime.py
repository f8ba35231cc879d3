"""Random streams and replication-level parallelism.

Every random stream is a Philox counter-based generator keyed by
``(seed, stream)`` through :class:`numpy.random.SeedSequence`, so replication
``r`` of a run draws the same numbers whatever order or thread it runs in.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "CHAWKES_THREADS"


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: ``$CHAWKES_THREADS`` wins, then ``threads``, then the CPU count."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads:
        return max(1, int(threads))
    return os.cpu_count() or 1


def map_ordered(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` on a thread pool; results keep input order."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
