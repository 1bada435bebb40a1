from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_WORKERS_MAX = 32


def clamp_workers(n: int) -> int:
    return max(1, min(_WORKERS_MAX, int(n)))


def parallel_map(fn: Callable[[T], R], items: Sequence[T], max_workers: int = 1) -> list[R]:
    """Order-preserving map over a bounded thread pool.

    Intended for read-only work against frozen parameters. A crash in any item is
    logged and re-raised once the pool has drained.
    """

    workers = clamp_workers(max_workers)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]

    def _run(idx: int) -> R:
        try:
            return fn(items[idx])
        except Exception:
            logger.exception("worker crashed: item=%d", idx)
            raise

    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="dal-worker") as ex:
        return list(ex.map(_run, range(len(items))))
