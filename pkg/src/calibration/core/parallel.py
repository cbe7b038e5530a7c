import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("CALIB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring non-integer CALIB_THREADS={raw!r}")
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """Apply fn to every item; results come back in input order.

    Callers reduce the returned list sequentially, so sums do not depend on
    how many threads ran.
    """
    items = list(items)
    workers = min(max_workers or thread_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
