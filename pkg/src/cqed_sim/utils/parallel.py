"""Thread-pool map with a progress bar and deterministic output order."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

from constants import CQED_SIM_THREADS

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Resolve the worker count: explicit value, CQED_SIM_THREADS, then cpu count."""
    if threads and threads > 0:
        return threads
    if CQED_SIM_THREADS > 0:
        return CQED_SIM_THREADS
    return os.cpu_count() or 1


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: Optional[int] = None,
    desc: str = "Evaluating",
    show_progress: bool = False,
) -> List[R]:
    """Apply ``fn`` to every item, preserving input order in the result.

    Args:
        fn: Function of one item
        items: Items to evaluate
        threads: Worker count (None = CQED_SIM_THREADS or all cores)
        desc: Progress bar label
        show_progress: Display a tqdm progress bar

    Returns:
        Results in the same order as ``items``
    """
    workers = resolve_threads(threads)
    results: List[Optional[R]] = [None] * len(items)

    if workers == 1 or len(items) <= 1:
        for i, item in enumerate(
            tqdm(items, desc=desc, unit="pt", disable=not show_progress)
        ):
            results[i] = fn(item)
        return results  # type: ignore[return-value]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_index = {
            executor.submit(fn, item): i for i, item in enumerate(items)
        }

        with tqdm(
            total=len(items), desc=desc, unit="pt", disable=not show_progress
        ) as pbar:
            for future in as_completed(future_to_index):
                i = future_to_index[future]
                try:
                    results[i] = future.result()
                except Exception as e:
                    logger.error(f"Task failed for item {i}: {e}")
                    raise
                pbar.update(1)

    return results  # type: ignore[return-value]
