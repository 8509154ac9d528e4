"""Seeded, partition-independent standard normal draws.

Generator: numpy's Philox (4x64 counter-based) bit generator; normals come from
``Generator.standard_normal`` (numpy's ziggurat).  Draws are cut into fixed
blocks of :data:`BLOCK_ROWS` rows and block ``b`` always uses the stream keyed
by ``SeedSequence([seed, b])``.  Blocks may be filled by any number of worker
threads; the assembled array depends only on ``seed``, the row count and the
dimension.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

GENERATOR_NAME = "numpy.Philox4x64/ziggurat-normal/v1"
BLOCK_ROWS = 1 << 16
_SEED_LIMIT = 1 << 64


def worker_count() -> int:
    """Worker cap from ``PROJLIM_THREADS`` (default: CPU count)."""
    raw = os.environ.get("PROJLIM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"PROJLIM_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def stream(seed: int, worker_id: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, int(worker_id)])))


def standard_normals(count: int, dim: int, seed: int, workers: int | None = None) -> np.ndarray:
    """``count x dim`` i.i.d. N(0, 1) draws, identical for any ``workers``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = np.empty((count, dim))
    nblocks = -(-count // BLOCK_ROWS)

    def fill(b):
        lo = b * BLOCK_ROWS
        hi = min(count, lo + BLOCK_ROWS)
        out[lo:hi] = stream(seed, b).standard_normal((hi - lo, dim))

    workers = min(workers or worker_count(), nblocks)
    if workers <= 1:
        for b in range(nblocks):
            fill(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(nblocks)))
    return out
