"""Order-preserving map over independent tasks, optionally across processes.

Every task owns its own derived random stream, so results are identical
whatever the worker count; gathering by input order keeps outputs
byte-stable.  Worker processes pin their BLAS pools to one thread: the
matrices here are small, and letting every worker spawn a full BLAS pool
oversubscribes the machine.
"""

from concurrent.futures import ProcessPoolExecutor

__all__ = ["parallel_map"]

_BLAS_LIMIT = None  # keeps the threadpoolctl handle alive in each worker


def _limit_worker_blas():
    global _BLAS_LIMIT
    try:
        from threadpoolctl import threadpool_limits

        _BLAS_LIMIT = threadpool_limits(limits=1)
    except Exception:
        pass


def parallel_map(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(threads, len(items))
    with ProcessPoolExecutor(max_workers=workers, initializer=_limit_worker_blas) as pool:
        return list(pool.map(fn, items, chunksize=1))
