"""Worker-count policy and a chunked, order-preserving parallel map.

Chunk boundaries depend only on the input length, never on the number of
workers, so any per-row numerical result is independent of PCANN_THREADS.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK_ROWS = 2048


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        raw = os.environ.get("PCANN_THREADS", "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"PCANN_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError("thread count must be >= 0")
    if threads == 0:
        threads = min(8, os.cpu_count() or 1)
    return threads


def pmap(fn, items, threads: int | None = None) -> list:
    items = list(items)
    n = worker_count(threads)
    if n == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def chunk_slices(n: int, size: int = CHUNK_ROWS) -> list[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]
