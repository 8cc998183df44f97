"""Stable blocked counting sort, the distribution step of the radix sorters.

The input range is cut into ``l`` blocks.  Each block counts its records per
bucket into one row of an ``l x r'`` count matrix (phase 1), a column-major
exclusive prefix sum turns counts into per-block write offsets (phase 2), and
each block scatters its records to those offsets (phase 3).  Offsets assign
every (block, bucket) pair a disjoint destination range, so phases 1 and 3
parallelize over blocks with output identical to the sequential run, and
records of equal bucket keep their input order: the sort is stable for every
block count.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import parallel
from ._kernels import scatter_block
from .core import EMPTY_PAYLOADS, InstrumentReport, SortConfig

__all__ = [
    "CountMatrix",
    "default_block_count",
    "exclusive_offsets",
    "counting_sort",
]

# Below this many matrix entries the prefix sum runs as one numpy call;
# chunking smaller matrices across threads costs more than it saves.
_PREFIX_PARALLEL_CUTOFF = 1 << 16


@dataclass
class CountMatrix:
    """Per-block bucket counts and the derived write offsets.

    ``offsets[j, i]`` is the destination of block ``j``'s first record for
    bucket ``i``: the total count of smaller buckets plus bucket ``i``'s
    count in earlier blocks (column-major exclusive prefix sum).
    """

    counts: np.ndarray  # (l, r') int64
    offsets: np.ndarray  # (l, r') int64
    block_bounds: np.ndarray  # (l + 1,) int64


def default_block_count(n_prime: int, nbuckets: int, workers: int) -> int:
    """Block count: enough blocks for load balance, small enough that the
    count matrix stays cache-resident.  Tiny inputs use a single block."""
    if n_prime < 2 * nbuckets:
        return 1
    per_block = max(nbuckets, 1024)
    return max(1, min(-(-n_prime // per_block), 8 * workers))


def exclusive_offsets(counts: np.ndarray, parallel_ok: bool = False) -> np.ndarray:
    """Column-major exclusive prefix sum of an ``(l, r')`` count matrix."""
    totals = counts.sum(axis=0)
    bucket_starts = np.zeros_like(totals)
    np.cumsum(totals[:-1], out=bucket_starts[1:])
    if parallel_ok and counts.size >= _PREFIX_PARALLEL_CUTOFF:
        offsets = np.empty_like(counts)
        workers = parallel.num_workers()
        ncols = counts.shape[1]
        step = max(1, -(-ncols // workers))

        def column_chunk(c0: int, c1: int) -> None:
            sub = counts[:, c0:c1]
            offsets[:, c0:c1] = np.cumsum(sub, axis=0) - sub + bucket_starts[c0:c1]

        tasks = [
            (lambda a=a, b=min(a + step, ncols): column_chunk(a, b))
            for a in range(0, ncols, step)
        ]
        parallel.run_tasks(tasks)
        return offsets
    return np.cumsum(counts, axis=0) - counts + bucket_starts


def counting_sort(
    keys: np.ndarray,
    bucket_of: Callable[[np.ndarray], np.ndarray],
    nbuckets: int,
    out_keys: np.ndarray,
    payloads: np.ndarray | None = None,
    out_payloads: np.ndarray | None = None,
    cfg: SortConfig | None = None,
    parallel_ok: bool = False,
    report: InstrumentReport | None = None,
) -> np.ndarray:
    """Stably sort records into ``out_*`` by bucket id.

    ``bucket_of`` maps a key array to integer bucket ids in ``[0, nbuckets)``;
    an id outside that range is a contract violation and raises.  Returns the
    bucket boundaries: ``offsets[i]`` is the first output index of bucket
    ``i`` and ``offsets[nbuckets]`` equals the record count.  Exactly one
    write per record, counted in ``report.moves`` when instrumenting.
    """
    n_prime = int(keys.shape[0])
    if nbuckets < 1:
        raise ValueError("nbuckets must be >= 1")
    if out_keys.shape[0] != n_prime or out_keys.dtype != keys.dtype:
        raise ValueError("out_keys must match keys in length and dtype")
    has_payload = payloads is not None
    if has_payload and (out_payloads is None or out_payloads.shape[0] != n_prime):
        raise ValueError("out_payloads must match payloads in length")
    if n_prime and np.shares_memory(keys, out_keys):
        raise ValueError("output must not alias the input")

    offsets_out = np.zeros(nbuckets + 1, dtype=np.int64)
    if n_prime == 0:
        return offsets_out

    policy = (cfg.block_policy if cfg and cfg.block_policy else default_block_count)
    l = max(1, int(policy(n_prime, nbuckets, parallel.num_workers())))
    bounds = (n_prime * np.arange(l + 1, dtype=np.int64)) // l

    bids = np.empty(n_prime, dtype=np.int32)
    counts = np.zeros((l, nbuckets), dtype=np.int64)

    def count_block(j: int) -> None:
        b0, b1 = int(bounds[j]), int(bounds[j + 1])
        ids = np.asarray(bucket_of(keys[b0:b1]))
        try:
            row = np.bincount(ids, minlength=nbuckets)
        except (ValueError, TypeError) as exc:
            raise ValueError(
                f"bucket_of produced ids outside [0, {nbuckets})"
            ) from exc
        if row.shape[0] > nbuckets:
            raise ValueError(f"bucket_of produced ids outside [0, {nbuckets})")
        counts[j] = row
        bids[b0:b1] = ids

    parallel.run_tasks([(lambda j=j: count_block(j)) for j in range(l)], parallel_ok)

    matrix = CountMatrix(counts, exclusive_offsets(counts, parallel_ok), bounds)

    pay = payloads if has_payload else EMPTY_PAYLOADS
    out_pay = out_payloads if has_payload else EMPTY_PAYLOADS

    def scatter(j: int) -> None:
        b0, b1 = int(bounds[j]), int(bounds[j + 1])
        scatter_block(
            keys, pay, has_payload, bids, b0, b1,
            matrix.offsets[j].copy(), out_keys, out_pay,
        )

    parallel.run_tasks([(lambda j=j: scatter(j)) for j in range(l)], parallel_ok)

    np.cumsum(counts.sum(axis=0), out=offsets_out[1:])
    if report is not None:
        report.moves += n_prime
    return offsets_out
