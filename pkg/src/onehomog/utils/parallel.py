from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Sequence, TypeVar

from tqdm import tqdm

from onehomog.config import OneHomogConfig
from onehomog.utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int | None = None,
    desc: str | None = None,
) -> list[R]:
    """
    Apply ``fn`` to every item on a thread pool and return results in item order.

    Args:
        fn: Pure function evaluated once per item.
        items: Work items; their order fixes the order of the results.
        workers: Pool size. Defaults to ``OneHomogConfig().threads``.
        desc: Progress-bar label; the bar is hidden off a terminal.
    """
    if workers is None:
        workers = OneHomogConfig().threads
    workers = max(1, min(workers, len(items) or 1))

    results: list[R | None] = [None] * len(items)
    if workers == 1:
        for idx, item in enumerate(items):
            results[idx] = fn(item)
        return results  # type: ignore[return-value]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): idx for idx, item in enumerate(items)}
        with tqdm(total=len(futures), desc=desc, disable=None, leave=False) as bar:
            for future in as_completed(futures):
                idx = futures[future]
                results[idx] = future.result()
                bar.update(1)

    logger.debug(f"Evaluated {len(items)} tasks on {workers} workers")
    return results  # type: ignore[return-value]
