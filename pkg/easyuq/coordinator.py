"""Bounded parallel execution of independent units of work."""
from __future__ import annotations

import asyncio
import logging
import os
from typing import Callable, Sequence, TypeVar

_LOGGER = logging.getLogger(__name__)

T = TypeVar("T")


def default_threads() -> int:
    return os.cpu_count() or 1


class TaskCoordinator:
    """Class to run independent jobs on worker threads and collect their results.

    Results come back in submission order. A job that raises does not stop the
    others; its exception is returned in its slot.
    """

    def __init__(self, name: str, threads: int | None = None) -> None:
        """Initialize."""
        self.name = name
        self.threads = max(1, int(threads or default_threads()))

    def run(self, jobs: Sequence[Callable[[], T]]) -> list[T | Exception]:
        """Run all jobs and return their results or exceptions."""
        if not jobs:
            return []
        if self.threads == 1 or len(jobs) == 1:
            results = [self._run_inline(index, job) for index, job in enumerate(jobs)]
        else:
            results = asyncio.run(self._async_run(jobs))
        self._log_failures(results)
        return results

    def run_or_raise(self, jobs: Sequence[Callable[[], T]]) -> list[T]:
        """Run all jobs; re-raise the first failure in submission order."""
        results = self.run(jobs)
        for result in results:
            if isinstance(result, Exception):
                raise result
        return results  # type: ignore[return-value]

    def _run_inline(self, index: int, job: Callable[[], T]) -> T | Exception:
        try:
            return job()
        except Exception as err:  # pylint: disable=broad-except
            return err

    async def _async_run(self, jobs: Sequence[Callable[[], T]]) -> list[T | Exception]:
        semaphore = asyncio.Semaphore(self.threads)

        async def _run_one(index: int, job: Callable[[], T]) -> T:
            async with semaphore:
                _LOGGER.debug("%s: starting unit %d", self.name, index)
                return await asyncio.to_thread(job)

        # Parallelize units with asyncio.gather; failures are returned, not raised
        return await asyncio.gather(
            *(_run_one(index, job) for index, job in enumerate(jobs)),
            return_exceptions=True,
        )

    def _log_failures(self, results: Sequence[object]) -> None:
        for index, result in enumerate(results):
            if isinstance(result, Exception):
                _LOGGER.error("%s: unit %d failed: %s", self.name, index, result)
