"""Stable parallel integer sorting with duplicate-aware bucketing.

The sorter distributes records by their most-significant digit, but first
samples each subproblem to find keys frequent enough to deserve buckets of
their own.  Those buckets need no further sorting; a cheap in-place merge
dovetails them back between the ordinary buckets afterwards.  Inputs heavy
with duplicates therefore recurse on a small fraction of the data, while
nearly-distinct inputs degrade gracefully to a plain radix sort.

Quick start::

    from dovetail import DistSpec, RecordArray, SortConfig, dt_sort, generate

    records = generate(DistSpec("zipf", 1.2, 1_000_000, key_width=32, seed=7))
    dt_sort(records, SortConfig(seed=7))      # stable, in place

Thread count is a process-wide knob (``set_num_workers``); results never
depend on it.
"""
from .core import InstrumentReport, RecordArray, SortConfig, rng_stream
from .dtmerge import MergeStats, dt_merge
from .dtsort import dt_sort, plain_msd_sort
from .gen import DistSpec, generate, generate_edges, read_dataset, write_dataset
from .parallel import num_workers, set_num_workers

__version__ = "0.1.0"

__all__ = [
    "DistSpec",
    "InstrumentReport",
    "MergeStats",
    "RecordArray",
    "SortConfig",
    "dt_merge",
    "dt_sort",
    "generate",
    "generate_edges",
    "num_workers",
    "plain_msd_sort",
    "read_dataset",
    "rng_stream",
    "set_num_workers",
    "write_dataset",
    "__version__",
]
