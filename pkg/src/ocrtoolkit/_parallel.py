"""Order-preserving parallel map with a bounded number of tasks in flight."""
from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor


def ordered_map(fn, items, workers=1, *, threads=False, window=None):
    """Like ``map(fn, items)``; results come back in input order.

    At most ``window`` (default ``4 * workers``) items are pending, so inputs
    are consumed lazily.
    """
    if workers <= 1:
        yield from map(fn, items)
        return
    window = window or 4 * workers
    pool_cls = ThreadPoolExecutor if threads else ProcessPoolExecutor
    with pool_cls(max_workers=workers) as pool:
        pending = deque()
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
