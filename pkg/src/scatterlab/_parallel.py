"""Deterministic chunked map for the heavy batched loops.

Work is split into fixed index ranges; results are combined in range order
no matter which thread finishes first, so SCATTERLAB_THREADS changes wall
time only, never output bytes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "map_chunks"]


def thread_count() -> int:
    raw = os.environ.get("SCATTERLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def map_chunks(fn, n_items: int, chunk: int):
    """Apply ``fn(lo, hi)`` over [0, n_items) in fixed chunks; return the
    list of results in chunk order."""
    ranges = [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]
    workers = thread_count()
    if workers == 1 or len(ranges) == 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futs]
