"""Sampling, heavy-key detection, and bucket planning.

A subproblem first draws a sorted sample ``S`` of its keys.  Keys that repeat
in a strided subsample of ``S`` are declared heavy and get a bucket of their
own, placed directly after the light bucket of their most-significant-digit
zone; everything else lands in a per-zone light bucket.  Heavy buckets are
never recursed into (their keys are all equal) and are interleaved back into
key order by the dovetail merge after the light bucket of the zone is sorted.

Bucket ids are assigned in one left-to-right scan: zones ascending, light
bucket first within a zone, then that zone's heavy keys ascending, with the
optional overflow bucket last.  Two lookup structures realize the id map in
constant time per key: ``light_ids`` indexed by digit value, and the sorted
``heavy_keys`` array searched by binary search (allocation-free).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import parallel
from .core import ceil_log2, rng_stream

__all__ = [
    "BucketDescriptor",
    "BucketPlan",
    "sample_count",
    "draw_samples",
    "detect_heavy",
    "plan_overflow",
    "plan_buckets",
    "all_light_plan",
]

_SAMPLE_CHUNK = 8192
_SAMPLE_TAG = 1 << 60


@dataclass(frozen=True)
class BucketDescriptor:
    id: int
    zone: int
    kind: str  # "light" | "heavy" | "overflow"
    key: int | None = None  # the single key of a heavy bucket


@dataclass
class BucketPlan:
    """Bucket layout for one distribution pass."""

    gamma: int
    digit_shift: int  # low bit index of the current digit
    key_width: int
    light_ids: np.ndarray  # zone -> light bucket id, (2**gamma,) int32
    heavy_keys: np.ndarray  # ascending, key dtype
    heavy_ids: np.ndarray  # (len(heavy_keys),) int32
    heavy_zone_offsets: np.ndarray  # (2**gamma + 1,) exclusive prefix of per-zone heavy counts
    nbuckets: int
    overflow_id: int = -1  # -1 when no overflow bucket exists
    overflow_threshold: int | None = None

    @property
    def nzones(self) -> int:
        return 1 << self.gamma

    @property
    def has_heavy(self) -> bool:
        return self.heavy_keys.shape[0] > 0

    def heavy_range(self, zone: int) -> tuple[int, int]:
        """Index range of ``zone``'s heavy keys within ``heavy_keys``."""
        return int(self.heavy_zone_offsets[zone]), int(self.heavy_zone_offsets[zone + 1])

    def bucket_ids(self, keys: np.ndarray) -> np.ndarray:
        """Vectorized bucket id per key (int32)."""
        msd = (keys >> np.uint8(self.digit_shift)) & keys.dtype.type((1 << self.gamma) - 1)
        bids = self.light_ids[msd]
        m = self.heavy_keys.shape[0]
        if m:
            pos = np.searchsorted(self.heavy_keys, keys)
            pos = np.minimum(pos, m - 1)
            hit = self.heavy_keys[pos] == keys
            bids[hit] = self.heavy_ids[pos[hit]]
        if self.overflow_id >= 0:
            bids[keys >= keys.dtype.type(self.overflow_threshold)] = self.overflow_id
        return bids

    def get_bucket_id(self, key: int) -> int:
        """Scalar bucket id: overflow check, heavy lookup, then zone table."""
        key = int(key)
        if self.overflow_id >= 0 and key >= self.overflow_threshold:
            return self.overflow_id
        m = self.heavy_keys.shape[0]
        if m:
            pos = int(np.searchsorted(self.heavy_keys, key))
            if pos < m and int(self.heavy_keys[pos]) == key:
                return int(self.heavy_ids[pos])
        return int(self.light_ids[(key >> self.digit_shift) & ((1 << self.gamma) - 1)])

    @cached_property
    def descriptors(self) -> list[BucketDescriptor]:
        """Bucket list ordered by id (built on demand; the hot path uses the
        arrays directly)."""
        out: list[BucketDescriptor] = []
        for zone in range(self.nzones):
            out.append(BucketDescriptor(int(self.light_ids[zone]), zone, "light"))
            h0, h1 = self.heavy_range(zone)
            for h in range(h0, h1):
                out.append(
                    BucketDescriptor(
                        int(self.heavy_ids[h]), zone, "heavy", int(self.heavy_keys[h])
                    )
                )
        if self.overflow_id >= 0:
            out.append(BucketDescriptor(self.overflow_id, self.nzones - 1, "overflow"))
        return out


def sample_count(n_prime: int, gamma: int, n_total: int) -> int:
    """Sample budget ``min(n', 2**gamma * ceil_log2(n_total))``.

    Log factors use the original input size, not the subproblem size, so the
    detection guarantee survives into the recursion.
    """
    return min(int(n_prime), (1 << gamma) * ceil_log2(n_total))


def _sample_stream_id(depth: int, base_index: int, chunk: int) -> int:
    return (
        _SAMPLE_TAG
        | ((depth & 0xFF) << 48)
        | ((base_index & 0xFF_FFFF_FFFF) << 8)
        | (chunk & 0xFF)
    )


def draw_samples(
    keys: np.ndarray,
    gamma: int,
    n_total: int,
    seed: int,
    depth: int = 0,
    base_index: int = 0,
    rule=None,
    parallel_ok: bool = False,
) -> np.ndarray:
    """Draw the subproblem's key sample, uniformly with replacement, sorted.

    Draws are split into fixed-size chunks, each fed by its own random
    stream keyed by ``(depth, base_index, chunk)``, so the sample is a pure
    function of the seed and the subproblem's position: thread count and
    chunk scheduling cannot change it.
    """
    n_prime = int(keys.shape[0])
    count = int((rule or sample_count)(n_prime, gamma, n_total))
    count = min(count, n_prime) if n_prime else 0
    if count <= 0:
        return np.empty(0, dtype=keys.dtype)
    out = np.empty(count, dtype=keys.dtype)

    def draw_chunk(c: int, off: int, cnt: int) -> None:
        g = rng_stream(seed, _sample_stream_id(depth, base_index, c))
        idx = g.integers(0, n_prime, size=cnt, dtype=np.uint64)
        out[off : off + cnt] = keys[idx]

    tasks = []
    for c, off in enumerate(range(0, count, _SAMPLE_CHUNK)):
        cnt = min(_SAMPLE_CHUNK, count - off)
        tasks.append(lambda c=c, off=off, cnt=cnt: draw_chunk(c, off, cnt))
    parallel.run_tasks(tasks, parallel_ok)
    out.sort()
    return out


def detect_heavy(samples: np.ndarray, n_total: int) -> np.ndarray:
    """Heavy keys: values repeating in the strided subsample of ``samples``.

    ``samples`` must be sorted, so a key's copies form one run; taking every
    ``ceil_log2(n_total)``-th element keeps a key only if its run straddles
    at least two stride points, which frequent keys do with high probability
    and rare keys essentially never do.  Returns distinct keys ascending.
    """
    if samples.shape[0] == 0:
        return samples[:0]
    sub = samples[:: ceil_log2(n_total)]
    values, counts = np.unique(sub, return_counts=True)
    return values[counts >= 2]


def plan_overflow(samples: np.ndarray, key_width: int, gamma: int) -> tuple[int, int | None]:
    """Decide how many leading digits to skip, from the sample maximum.

    Returns ``(skip_bits, threshold)``.  ``skip_bits`` is the sample max's
    leading-zero count floored to a whole number of ``gamma``-bit digits and
    capped so at least one digit remains.  Keys at or above ``threshold``
    have a set bit inside the skipped digits and go to the overflow bucket.
    A zero threshold slot (``None``) means nothing is skipped.
    """
    mx = int(samples.max()) if samples.shape[0] else 0
    clz = key_width - mx.bit_length()
    skip = (clz // gamma) * gamma
    skip = min(skip, ((key_width - 1) // gamma) * gamma)
    if skip <= 0:
        return 0, None
    return skip, 1 << (key_width - skip)


def plan_buckets(
    heavy_keys: np.ndarray,
    gamma: int,
    digit_shift: int,
    key_width: int,
    overflow_threshold: int | None = None,
) -> BucketPlan:
    """Assign bucket ids to zones, heavy keys, and the overflow bucket.

    ``heavy_keys`` must be distinct and ascending.  Within each zone the
    light bucket comes first, then the zone's heavy keys in key order, so
    the id of zone ``z``'s light bucket is ``z`` plus the number of heavy
    keys in earlier zones.
    """
    nz = 1 << gamma
    m = int(heavy_keys.shape[0])
    hz = ((heavy_keys >> np.uint8(digit_shift)) & heavy_keys.dtype.type(nz - 1)).astype(
        np.int64
    )
    per_zone = np.bincount(hz, minlength=nz)
    zone_off = np.zeros(nz + 1, dtype=np.int64)
    np.cumsum(per_zone, out=zone_off[1:])
    light_ids = (np.arange(nz, dtype=np.int64) + zone_off[:-1]).astype(np.int32)
    heavy_ids = (
        light_ids[hz].astype(np.int64) + 1 + (np.arange(m, dtype=np.int64) - zone_off[hz])
    ).astype(np.int32)
    nbuckets = nz + m
    overflow_id = -1
    if overflow_threshold is not None:
        overflow_id = nbuckets
        nbuckets += 1
    return BucketPlan(
        gamma=gamma,
        digit_shift=digit_shift,
        key_width=key_width,
        light_ids=light_ids,
        heavy_keys=heavy_keys,
        heavy_ids=heavy_ids,
        heavy_zone_offsets=zone_off,
        nbuckets=nbuckets,
        overflow_id=overflow_id,
        overflow_threshold=overflow_threshold,
    )


def all_light_plan(gamma: int, digit_shift: int, key_width: int, key_dtype) -> BucketPlan:
    """Plan with one light bucket per zone and nothing else (no sampling)."""
    empty = np.empty(0, dtype=key_dtype)
    return plan_buckets(empty, gamma, digit_shift, key_width, None)
