"""Replica-sharded process parallelism.

Replica r always draws from the stream (master_seed, stream_index=r), so
results are invariant to the worker count and to shard boundaries; shards
return sufficient statistics that merge by concatenation or summation in
replica order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

__all__ = ["resolve_jobs", "map_shards"]


def resolve_jobs(n_jobs: int | None = None) -> int:
    if n_jobs is not None and n_jobs >= 1:
        return n_jobs
    env = os.environ.get("HARDEDGE_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_shards(worker, n_total: int, args: tuple, n_jobs: int | None = None):
    """Run worker(lo, hi, *args) over contiguous shards of range(n_total).

    Returns the per-shard results ordered by shard start.  With one job the
    worker runs inline (no process pool), which keeps small calls cheap and
    debuggable.
    """
    n_jobs = resolve_jobs(n_jobs)
    if n_total <= 0:
        return []
    if n_jobs == 1:
        return [worker(0, n_total, *args)]
    n_shards = min(n_total, n_jobs * 4)
    bounds = [(i * n_total) // n_shards for i in range(n_shards + 1)]
    shards = [(bounds[i], bounds[i + 1]) for i in range(n_shards) if bounds[i] < bounds[i + 1]]
    results = []
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        futures = [pool.submit(worker, lo, hi, *args) for lo, hi in shards]
        for fut in futures:
            results.append(fut.result())
    return results
