"""Optional thread fan-out with ordered results."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "HARMONIC_MVP_THREADS"


def worker_count() -> int:
    """Worker cap from ``HARMONIC_MVP_THREADS`` (default 1, i.e. serial)."""
    raw = os.environ.get(ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn, items):
    """``list(map(fn, items))``, threaded when more than one worker is allowed."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
