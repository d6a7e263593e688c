"""Deterministic task fan-out for the engines.

Tasks are partitioned by fixed-size constants (never by worker count) and
results are always consumed in task order, so any reduction performed by the
caller sees the same floating-point evaluation order for every --threads
value.  That makes outputs byte-identical across worker counts.
"""
from __future__ import annotations

import multiprocessing
from typing import Callable, Iterable, Sequence


def map_ordered(fn: Callable, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(min(threads, len(tasks))) as pool:
        return list(pool.imap(fn, tasks, chunksize=1))
