"""Deterministic fork-join helpers.

Every parallel section in this package follows one rule: tasks only write to
ranges that were computed before the fork.  Scheduling order can therefore
never change the output, so the worker-thread count is a pure speed knob.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

_DEFAULT_WORKERS = max(1, os.cpu_count() or 1)
_workers = _DEFAULT_WORKERS
_pool: ThreadPoolExecutor | None = None


def num_workers() -> int:
    """Current worker-thread count."""
    return _workers


def set_num_workers(count: int | None) -> None:
    """Set the worker-thread count used by subsequent operations.

    ``None`` restores the default (the machine's CPU count).  Counts above
    the CPU count are allowed; they change scheduling, never results.
    """
    global _workers, _pool
    resolved = _DEFAULT_WORKERS if count is None else int(count)
    if resolved < 1:
        raise ValueError("worker count must be >= 1")
    if resolved != _workers and _pool is not None:
        _pool.shutdown(wait=True)
        _pool = None
    _workers = resolved


def _get_pool() -> ThreadPoolExecutor:
    global _pool
    if _pool is None:
        _pool = ThreadPoolExecutor(max_workers=_workers)
    return _pool


def run_tasks(tasks: Sequence[Callable[[], T]], parallel: bool = True) -> list[T]:
    """Run zero-argument callables, returning their results in task order.

    Falls back to a plain loop when parallelism is off, a single worker is
    configured, or there is at most one task.  Tasks must not submit further
    tasks (the recursion in this package parallelizes per level instead), so
    the fixed-size pool cannot deadlock.
    """
    if not parallel or _workers == 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    pool = _get_pool()
    futures = [pool.submit(task) for task in tasks]
    return [f.result() for f in futures]


def run_tasks_mixed(
    pooled: Sequence[Callable[[], T]],
    inline: Sequence[Callable[[], T]],
    parallel: bool = True,
) -> list[T]:
    """Run ``pooled`` tasks on the pool while ``inline`` tasks run in the
    calling thread, returning all results in ``pooled + inline`` order.

    Inline tasks may themselves fan out via :func:`run_tasks`; pooled tasks
    must not.  This lets a recursion hand a few large children the calling
    thread (keeping their internal parallelism) while small children queue
    behind them on the pool.
    """
    if not parallel or _workers == 1:
        return [task() for task in pooled] + [task() for task in inline]
    pool = _get_pool()
    futures = [pool.submit(task) for task in pooled]
    inline_results = [task() for task in inline]
    return [f.result() for f in futures] + inline_results
