"""
Process pool used for replicas and sweep cells.

Work items are mapped in order and results come back in input order, so the
output never depends on how many workers ran. Each item must carry its own
RngStream.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from typing import Callable, Generator, List, Optional, Sequence, TypeVar

from .config import get_thread_count

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class WorkerPool:
    """Manages the process pool and provides an order-preserving map."""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads if threads is not None else get_thread_count()
        if self.threads < 1:
            raise ValueError(f"worker count must be >= 1, got {self.threads}")

    @contextmanager
    def executor(self) -> Generator[Optional[ProcessPoolExecutor], None, None]:
        """
        Context manager for a process pool; yields None when running inline.

        Yields:
            The executor, or None for a single worker
        """
        if self.threads == 1:
            yield None
            return
        pool = ProcessPoolExecutor(max_workers=self.threads)
        try:
            yield pool
        except Exception as e:
            logger.error(f"Worker pool error: {e}")
            raise
        finally:
            pool.shutdown(cancel_futures=True)

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        Apply `fn` to every item; results keep the order of `items`.

        Args:
            fn: Picklable callable (module-level function or partial)
            items: Work items

        Returns:
            List of results
        """
        items = list(items)
        if not items:
            return []
        with self.executor() as pool:
            if pool is None:
                return [fn(item) for item in items]
            chunksize = max(1, len(items) // (4 * self.threads))
            logger.debug(f"Dispatching {len(items)} items to {self.threads} workers")
            return list(pool.map(fn, items, chunksize=chunksize))


def get_worker_pool(threads: Optional[int] = None) -> WorkerPool:
    """Pool sized from the argument or FRILAB_THREADS."""
    return WorkerPool(threads)
