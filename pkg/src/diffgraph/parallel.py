"""Thread-based helper for per-instance work.

Only parameter-independent computations (kernel building, score caching,
embedding with frozen weights) go through here, and results always come
back in input order, so the worker count can never change a result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError


def ordered_map(fn, items, workers: int = 1) -> list:
    """Apply fn to every item, in input order, on up to `workers` threads."""
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
