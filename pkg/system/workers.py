"""Bounded worker pool for independent units of work."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .logs import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Runs independent jobs on a bounded thread pool, returning results in input order."""

    def __init__(self, max_workers: int = 4):
        if max_workers < 1:
            raise ValueError("max_workers must be >= 1")
        self.max_workers = max_workers
        self._executor: Optional[ThreadPoolExecutor] = None

    def start(self):
        """Start the underlying executor."""
        if self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self.max_workers, thread_name_prefix="tandem-worker"
            )

    def stop(self):
        """Wait for running jobs and release the executor."""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply ``fn`` to every item.

        A single worker runs inline on the calling thread.

        Args:
            fn: Job function, must not share mutable state across items
            items: Inputs

        Returns:
            Results in the same order as ``items``
        """
        items = list(items)
        if self.max_workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        owned = self._executor is None
        if owned:
            self.start()
        try:
            futures = [self._executor.submit(fn, item) for item in items]
            return [future.result() for future in futures]
        finally:
            if owned:
                self.stop()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *args):
        self.stop()
