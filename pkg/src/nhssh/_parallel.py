"""Ordered thread-pool map honoring the NHSSH_THREADS cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "NHSSH_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_THREADS, "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` evaluated on a pool; output order = input order."""
    items = list(items)
    n = thread_count() if threads is None else max(1, threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def chunks(n: int, size: int):
    """Consecutive index slices covering range(n)."""
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]
