import concurrent.futures
from typing import Callable, Sequence, TypeVar

from tqdm import tqdm


T = TypeVar("T")
R = TypeVar("R")


def run_pool(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int = 1,
    desc: str | None = None,
    progress: bool = False,
) -> list[R]:
    """
    Applies `fn` to every item, optionally across a thread pool.

    Results come back in submission order whatever the completion order, so
    reductions over them are deterministic. With one worker everything runs inline.

    Args:
        fn (Callable): Function applied to each item; must not mutate shared state.
        items (Sequence): Work items.
        workers (int, optional): Thread count. Defaults to 1.
        desc (str | None, optional): Progress bar label.
        progress (bool, optional): Whether to show a progress bar. Defaults to False.

    Returns:
        list: fn(item) for each item, in input order.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not progress)]

    results: list = [None] * len(items)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for future in tqdm(
            concurrent.futures.as_completed(futures),
            total=len(futures),
            desc=desc,
            disable=not progress,
        ):
            results[futures[future]] = future.result()

    return results
