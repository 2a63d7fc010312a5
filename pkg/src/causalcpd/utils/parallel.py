"""Order-preserving parallel map over picklable work items."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from causalcpd.utils.progress import ProgressReporter

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    progress: Optional[ProgressReporter] = None,
) -> List[R]:
    """
    Apply ``fn`` to every item and return the results in input order.

    With ``threads <= 1`` the map runs in-process. Otherwise items are spread
    over ``threads`` worker processes; ``fn`` and the items must be picklable
    (module-level functions, ``functools.partial`` of them, pydantic models,
    numpy arrays). Result order never depends on scheduling, so callers that
    fold the list sequentially get identical output for any worker count.
    """
    work = list(items)
    if threads <= 1 or len(work) <= 1:
        results = []
        for item in work:
            results.append(fn(item))
            if progress is not None:
                progress.update(advance=1)
        return results

    workers = min(threads, len(work))
    logger.debug(f"parallel_map: {len(work)} items on {workers} workers")
    results = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for result in executor.map(fn, work):
            results.append(result)
            if progress is not None:
                progress.update(advance=1)
    return results
