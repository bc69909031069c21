"""Tests for the task coordinator."""
import threading

import pytest

from easyuq.coordinator import TaskCoordinator


def test_results_keep_submission_order():
    coordinator = TaskCoordinator("test", threads=4)
    results = coordinator.run([(lambda i=i: i * i) for i in range(20)])
    assert results == [i * i for i in range(20)]


def test_failures_are_returned_in_place():
    def boom():
        raise ValueError("bad unit")

    coordinator = TaskCoordinator("test", threads=2)
    results = coordinator.run([lambda: 1, boom, lambda: 3])
    assert results[0] == 1 and results[2] == 3
    assert isinstance(results[1], ValueError)
    with pytest.raises(ValueError, match="bad unit"):
        coordinator.run_or_raise([lambda: 1, boom])


def test_concurrency_is_bounded():
    lock = threading.Lock()
    active = []
    peak = []

    def job():
        with lock:
            active.append(1)
            peak.append(len(active))
        threading.Event().wait(0.01)
        with lock:
            active.pop()

    TaskCoordinator("test", threads=2).run([job] * 8)
    assert max(peak) <= 2


def test_single_thread_runs_inline():
    caller = threading.get_ident()
    assert TaskCoordinator("test", threads=1).run([threading.get_ident]) == [caller]
    assert TaskCoordinator("test", threads=3).run([]) == []
