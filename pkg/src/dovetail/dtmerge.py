"""Dovetail merge: interleave a sorted light run with per-key heavy runs.

A merged zone looks like ``[light | heavy_1 | heavy_2 | ... | heavy_m]``
where the light run is sorted, each heavy run holds copies of a single key,
and the heavy keys are strictly increasing.  The merge computes each heavy
run's insertion point in the light run by binary search, copies only the
smaller side out to scratch, slides the larger side inside the zone, and
copies the smaller side back into the gaps.

Sliding a run whose destination overlaps its current position uses two
reversals: reverse the run in place, then reverse the whole span from the
destination to the run's far end.  The run lands at its destination with its
original internal order; the rest of the span ends up reversed, which is
harmless because it is dead space (either backed up in scratch or vacated by
an earlier slide).  Every in-zone record is written at most twice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import reverse_range
from .core import EMPTY_PAYLOADS

__all__ = ["MergeStats", "MergeLayout", "compute_layout", "shift_block", "dt_merge"]


@dataclass(frozen=True)
class MergeStats:
    """Write counts of one merge: copies out to scratch, in-zone slide
    writes, and copies back from scratch."""

    out_copies: int = 0
    in_array_moves: int = 0
    restore_copies: int = 0


@dataclass
class MergeLayout:
    """Where each heavy run and light fragment belongs after the merge.

    ``insert_points[i]`` is the light rank before which heavy run ``i`` goes;
    ``dest_starts[i]`` adds the lengths of earlier heavy runs, giving the
    run's final zone offset.  Light fragment ``i`` (the light records between
    insert points ``i`` and ``i+1``) ends up at ``fragment_bounds[i] +
    heavy_prefix[i]``.
    """

    light_len: int
    heavy_lens: np.ndarray  # (m,) int64
    heavy_prefix: np.ndarray  # (m + 1,) exclusive prefix of heavy_lens
    insert_points: np.ndarray  # (m,) int64, nondecreasing
    dest_starts: np.ndarray  # (m,) int64
    fragment_bounds: np.ndarray  # (m + 2,) light offsets delimiting fragments


def compute_layout(
    light_keys: np.ndarray, heavy_keys: np.ndarray, heavy_lens: np.ndarray
) -> MergeLayout:
    """Binary-search every heavy key in the light run and lay out the zone."""
    m = heavy_keys.shape[0]
    heavy_lens = np.asarray(heavy_lens, dtype=np.int64)
    prefix = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(heavy_lens, out=prefix[1:])
    p = np.searchsorted(light_keys, heavy_keys).astype(np.int64)
    bounds = np.empty(m + 2, dtype=np.int64)
    bounds[0] = 0
    bounds[1 : m + 1] = p
    bounds[m + 1] = light_keys.shape[0]
    return MergeLayout(
        light_len=int(light_keys.shape[0]),
        heavy_lens=heavy_lens,
        heavy_prefix=prefix,
        insert_points=p,
        dest_starts=p + prefix[:-1],
        fragment_bounds=bounds,
    )


def shift_block(
    keys: np.ndarray,
    payloads: np.ndarray | None,
    src: int,
    length: int,
    dest: int,
) -> int:
    """Move ``[src, src+length)`` to ``dest`` in place via two reversals.

    Preserves the block's internal order.  Whatever else lies between the
    two positions ends up scrambled; callers must treat it as dead space.
    Returns the number of record writes: each record of the block is
    written once per flip, so a real shift counts ``2 * length`` (the dead
    space holds no live records and is not counted).
    """
    if length == 0 or dest == src:
        return 0
    has_pay = payloads is not None
    pay = payloads if has_pay else EMPTY_PAYLOADS
    reverse_range(keys, pay, has_pay, src, src + length)
    if dest < src:
        reverse_range(keys, pay, has_pay, dest, src + length)
    else:
        reverse_range(keys, pay, has_pay, src, dest + length)
    return 2 * length


def _validate(zone_keys, light_len, heavy_keys, heavy_lens, total):
    if light_len + int(heavy_lens.sum()) != total:
        raise ValueError("light_len plus heavy run lengths must tile the zone")
    if np.any(heavy_lens < 0):
        raise ValueError("heavy run lengths must be nonnegative")
    m = heavy_keys.shape[0]
    if m > 1 and not np.all(heavy_keys[1:] > heavy_keys[:-1]):
        raise ValueError("heavy keys must be strictly increasing")
    light = zone_keys[:light_len]
    if light_len > 1 and not np.all(light[1:] >= light[:-1]):
        raise ValueError("light run must be sorted")
    if m:
        pos = np.searchsorted(light, heavy_keys)
        pos = np.minimum(pos, max(light_len - 1, 0))
        if light_len and np.any(light[pos] == heavy_keys):
            raise ValueError("a heavy key also appears in the light run")
        off = light_len
        for i in range(m):
            ln = int(heavy_lens[i])
            if ln and not np.all(zone_keys[off : off + ln] == heavy_keys[i]):
                raise ValueError("heavy run contains a foreign key")
            off += ln


def dt_merge(
    zone_keys: np.ndarray,
    zone_payloads: np.ndarray | None,
    light_len: int,
    heavy_keys: np.ndarray,
    heavy_lens,
    scratch_keys: np.ndarray,
    scratch_payloads: np.ndarray | None = None,
    validate: bool = True,
) -> MergeStats:
    """Merge a zone in place; see the module notes for the layout contract.

    ``scratch_*`` must hold at least ``min(light_len, sum(heavy_lens))``
    records (a hard error otherwise).  Stability: ties between runs cannot
    occur (no heavy key appears in the light run), and every slide and copy
    preserves each run's internal order.
    """
    heavy_lens = np.asarray(heavy_lens, dtype=np.int64)
    m = int(heavy_keys.shape[0])
    if heavy_lens.shape[0] != m:
        raise ValueError("heavy_keys and heavy_lens must have equal length")
    light_len = int(light_len)
    total = int(zone_keys.shape[0])
    heavy_total = int(heavy_lens.sum())
    small_side = min(light_len, heavy_total)
    if scratch_keys.shape[0] < small_side:
        raise ValueError(
            f"scratch holds {scratch_keys.shape[0]} records, need {small_side}"
        )
    has_pay = zone_payloads is not None
    if has_pay and (scratch_payloads is None or scratch_payloads.shape[0] < small_side):
        raise ValueError("scratch payloads too small")
    if validate:
        _validate(zone_keys, light_len, heavy_keys, heavy_lens, total)
    if m == 0 or total == 0:
        return MergeStats()

    layout = compute_layout(zone_keys[:light_len], heavy_keys, heavy_lens)
    p = layout.insert_points
    prefix = layout.heavy_prefix
    bounds = layout.fragment_bounds

    out_copies = 0
    in_moves = 0
    restores = 0

    if heavy_total >= light_len:
        # Copy the light run out (ties favor the light side), slide heavy
        # runs left to right, then scatter the light fragments back.
        scratch_keys[:light_len] = zone_keys[:light_len]
        if has_pay:
            scratch_payloads[:light_len] = zone_payloads[:light_len]
        out_copies += light_len
        for i in range(m):
            ln = int(heavy_lens[i])
            src = light_len + int(prefix[i])
            dst = int(layout.dest_starts[i])
            if ln == 0 or dst == src:
                continue
            if dst + ln <= src:
                zone_keys[dst : dst + ln] = zone_keys[src : src + ln]
                if has_pay:
                    zone_payloads[dst : dst + ln] = zone_payloads[src : src + ln]
                in_moves += ln
            else:
                in_moves += shift_block(zone_keys, zone_payloads, src, ln, dst)
        for i in range(m + 1):
            f0, f1 = int(bounds[i]), int(bounds[i + 1])
            flen = f1 - f0
            dst = f0 + int(prefix[i])
            if flen == 0 or dst == f0:
                continue  # fragment 0 is already in place
            zone_keys[dst : dst + flen] = scratch_keys[f0:f1]
            if has_pay:
                zone_payloads[dst : dst + flen] = scratch_payloads[f0:f1]
            restores += flen
    else:
        # Copy the heavy runs out, slide light fragments right to left
        # (rightmost first), then place the heavy runs into the gaps.
        scratch_keys[:heavy_total] = zone_keys[light_len : light_len + heavy_total]
        if has_pay:
            scratch_payloads[:heavy_total] = zone_payloads[light_len : light_len + heavy_total]
        out_copies += heavy_total
        for i in range(m, 0, -1):
            f0, f1 = int(bounds[i]), int(bounds[i + 1])
            flen = f1 - f0
            dst = f0 + int(prefix[i])
            if flen == 0 or dst == f0:
                continue
            if f0 + flen <= dst:
                zone_keys[dst : dst + flen] = zone_keys[f0:f1]
                if has_pay:
                    zone_payloads[dst : dst + flen] = zone_payloads[f0:f1]
                in_moves += flen
            else:
                in_moves += shift_block(zone_keys, zone_payloads, f0, flen, dst)
        for i in range(m):
            ln = int(heavy_lens[i])
            if ln == 0:
                continue
            s0 = int(prefix[i])
            dst = int(layout.dest_starts[i])
            zone_keys[dst : dst + ln] = scratch_keys[s0 : s0 + ln]
            if has_pay:
                zone_payloads[dst : dst + ln] = scratch_payloads[s0 : s0 + ln]
            restores += ln
    return MergeStats(out_copies, in_moves, restores)
