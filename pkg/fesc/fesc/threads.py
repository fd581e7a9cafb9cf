"""Order-preserving parallel map, capped by the `fesc.threads` setting."""

from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Callable, Iterable, List, TypeVar

from fesc.settings import FESC_THREADS

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    return max(1, int(FESC_THREADS))


def parallel_map(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Maps `func` over `items`; results come back in input order regardless of the pool size."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    log.debug("Mapping %s items over %s threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
