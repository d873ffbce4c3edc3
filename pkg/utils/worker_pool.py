# [file name]: utils/worker_pool.py
"""
Order-preserving parallel map over a thread pool.

Work items carry their own random streams, so results do not depend on the
number of threads or on scheduling.
"""

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional

from utils.log import get_logger

logger = get_logger("WorkerPool")


class ParallelMap:
    """Thread pool shared by the Monte-Carlo and spectrum workloads."""

    def __init__(self, threads: Optional[int] = None):
        if threads is not None and threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        self.threads = threads or min(os.cpu_count() or 1, 8)
        self._executor: Optional[ThreadPoolExecutor] = None
        self._lock = threading.Lock()

    def _pool(self) -> ThreadPoolExecutor:
        with self._lock:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="atomsense")
                logger.debug(f"started {self.threads} worker threads")
            return self._executor

    def map(self, fn: Callable, items: Iterable) -> list:
        """Apply fn to every item; results come back in input order."""
        items = list(items)
        if self.threads == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        return list(self._pool().map(fn, items))

    def close(self):
        with self._lock:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False
