"""The sorters: heavy-key-aware MSD radix sort and its plain ablation.

Each call level works on a contiguous range of one of two equal-size buffers
(the caller's arrays plus one temporary).  A level does up to four steps:

1. Plan buckets.  The plain sorter always uses one light bucket per digit
   value; the dovetail sorter samples the range, detects heavy keys, and
   gives each its own bucket (plus, at the root, an overflow bucket that
   absorbs keys above the sampled range so leading all-zero digits can be
   skipped).
2. Distribute records stably into the opposite buffer by bucket id.
3. Recurse into light buckets on the next digit.  Heavy buckets hold one key
   each and are done; the overflow bucket is comparison-sorted once.  Runs of
   buckets small enough for the base case are sorted with one batched stable
   comparison sort per contiguous span, which is equivalent because bucket
   boundaries agree with key order.
4. Dovetail-merge every zone that has heavy buckets, in the buffer that
   holds the data, using the same range of the other buffer as scratch
   (dead space at that point).

A level's result stays in the buffer the distribution wrote, so a child may
finish in either buffer; children that finish opposite their siblings are
copied over before step 4, and the driver copies the final result back into
the caller's arrays when it lands in the temporary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import parallel
from .core import InstrumentReport, RecordArray, SortConfig, gamma_for
from .counting import counting_sort
from .dtmerge import dt_merge
from .sampler import (
    BucketPlan,
    all_light_plan,
    detect_heavy,
    draw_samples,
    plan_buckets,
    plan_overflow,
    sample_count,
)

__all__ = ["dt_sort", "plain_msd_sort"]

# Children at least this large run in the calling thread with their phases
# parallelized; smaller ones become sequential pool tasks.
_INLINE_CHILD_CUTOFF = 1 << 18
_COPY_CHUNK = 1 << 21


@dataclass
class _Ctx:
    cfg: SortConfig
    mode: str  # "dt" | "plain"
    key_width: int
    n_total: int
    keys: list[np.ndarray]  # [caller buffer, temporary]
    pays: list[np.ndarray] | None


def dt_sort(records: RecordArray, cfg: SortConfig | None = None) -> InstrumentReport | None:
    """Sort ``records`` ascending by key, stably and in place.

    Returns an :class:`InstrumentReport` when ``cfg.instrument`` is set,
    otherwise ``None``.  Output and report are identical for every
    worker-thread count.
    """
    return _run(records, cfg, "dt")


def plain_msd_sort(records: RecordArray, cfg: SortConfig | None = None) -> InstrumentReport | None:
    """The ablation baseline: same distribution machinery, no sampling, no
    heavy or overflow buckets, no merging.  Same stable output as
    :func:`dt_sort`."""
    return _run(records, cfg, "plain")


def _run(records: RecordArray, cfg: SortConfig | None, mode: str) -> InstrumentReport | None:
    if not isinstance(records, RecordArray):
        raise TypeError("records must be a RecordArray")
    cfg = cfg or SortConfig()
    n = len(records)
    report = InstrumentReport() if cfg.instrument else None
    if n == 0:
        if report is not None:
            report.add_mass(0, 0)
        return report
    has_pay = records.payloads is not None
    ctx = _Ctx(
        cfg=cfg,
        mode=mode,
        key_width=records.key_width,
        n_total=n,
        keys=[records.keys, np.empty_like(records.keys)],
        pays=[records.payloads, np.empty_like(records.payloads)] if has_pay else None,
    )
    par = parallel.num_workers() > 1 and n >= cfg.parallel_grain
    res_buf, rep = _sort_rec(ctx, 0, n, 0, 0, 0, par)
    if res_buf == 1:
        _copy_between(ctx, 1, 0, 0, n, par)
        if rep is not None:
            rep.moves += n
    if report is not None and rep is not None:
        report.merge_from(rep)
    return report


def _copy_between(ctx: _Ctx, src: int, dst: int, lo: int, hi: int, par: bool) -> None:
    def chunk(a: int, b: int) -> None:
        ctx.keys[dst][a:b] = ctx.keys[src][a:b]
        if ctx.pays is not None:
            ctx.pays[dst][a:b] = ctx.pays[src][a:b]

    if not par or hi - lo <= _COPY_CHUNK:
        chunk(lo, hi)
        return
    tasks = [
        (lambda a=a, b=min(a + _COPY_CHUNK, hi): chunk(a, b))
        for a in range(lo, hi, _COPY_CHUNK)
    ]
    parallel.run_tasks(tasks)


def _base_sort(ctx: _Ctx, buf: int, lo: int, hi: int, rep: InstrumentReport | None) -> None:
    """Stable comparison sort of ``[lo, hi)`` in buffer ``buf``, by full key.

    Valid whenever the range's records agree on all already-consumed digits,
    which holds for every bucket and for spans of adjacent buckets.
    """
    n = hi - lo
    if n <= 0:
        return
    if rep is not None:
        rep.base_case_records += n
    if n == 1:
        return
    keys = ctx.keys[buf]
    order = np.argsort(keys[lo:hi], kind="stable")
    keys[lo:hi] = keys[lo:hi][order]
    if ctx.pays is not None:
        pays = ctx.pays[buf]
        pays[lo:hi] = pays[lo:hi][order]
    if rep is not None:
        rep.moves += n


def _sort_rec(
    ctx: _Ctx, lo: int, hi: int, consumed: int, depth: int, src: int, par: bool
) -> tuple[int, InstrumentReport | None]:
    """Sort ``[lo, hi)`` of buffer ``src``; returns (result buffer, counters)."""
    cfg = ctx.cfg
    n_sub = hi - lo
    rep = InstrumentReport() if cfg.instrument else None
    if rep is not None:
        rep.add_mass(depth, n_sub)
    if n_sub == 0:
        return src, rep
    remaining = ctx.key_width - consumed
    if remaining <= 0:
        return src, rep  # every digit consumed: keys in this range are equal
    gamma = gamma_for(n_sub, remaining, cfg)
    if n_sub < cfg.effective_theta(gamma):
        _base_sort(ctx, src, lo, hi, rep)
        return src, rep

    # Step 1: bucket plan (possibly skipping leading digits at the root).
    plan, consumed, gamma = _plan_step(ctx, lo, hi, consumed, depth, gamma, src, par)
    if rep is not None and depth == 0 and consumed > 0:
        rep.skipped_bits = consumed

    # Step 2: stable distribution into the opposite buffer.
    o = 1 - src
    offs = counting_sort(
        ctx.keys[src][lo:hi],
        plan.bucket_ids,
        plan.nbuckets,
        ctx.keys[o][lo:hi],
        ctx.pays[src][lo:hi] if ctx.pays is not None else None,
        ctx.pays[o][lo:hi] if ctx.pays is not None else None,
        cfg,
        par,
        rep,
    )
    if rep is not None:
        rep.note_distribution(depth)
        rep.add_mass(depth + 1, 0)  # materialize the next depth even if empty
        ovf = 0
        if plan.overflow_id >= 0:
            ovf = int(offs[plan.overflow_id + 1] - offs[plan.overflow_id])
        light_total = int((offs[plan.light_ids + 1] - offs[plan.light_ids]).sum())
        rep.add_heavy_removed(depth, n_sub - light_total - ovf)

    # Step 3: recurse into light buckets; batch base-case runs.
    child_reports = _children_step(ctx, plan, offs, lo, consumed, gamma, depth, o, par)

    # Step 4: dovetail-merge zones that have heavy buckets.
    merge_stats = _merge_step(ctx, plan, offs, lo, o, src, par)

    if rep is not None:
        for r in child_reports:
            rep.merge_from(r)
        for s in merge_stats:
            rep.merge_out_copies += s.out_copies
            rep.merge_in_array_moves += s.in_array_moves
            rep.moves += s.out_copies + s.in_array_moves + s.restore_copies
    return o, rep


def _plan_step(
    ctx: _Ctx, lo: int, hi: int, consumed: int, depth: int, gamma: int, src: int, par: bool
) -> tuple[BucketPlan, int, int]:
    """Step 1.  Returns ``(plan, consumed, gamma)``; the root may raise
    ``consumed`` by skipping leading digits the sample says are all zero."""
    cfg = ctx.cfg
    w = ctx.key_width
    shift = w - consumed - gamma
    dtype = ctx.keys[src].dtype
    n_sub = hi - lo
    if ctx.mode == "plain":
        return all_light_plan(gamma, shift, w, dtype), consumed, gamma
    rule = cfg.sample_rule or sample_count
    if n_sub < 2 * int(rule(n_sub, gamma, ctx.n_total)):
        # Samples would be a constant fraction of the range: not worth it,
        # and detection statistics break down.  Act as plain for this level.
        return all_light_plan(gamma, shift, w, dtype), consumed, gamma
    samples = draw_samples(
        ctx.keys[src][lo:hi], gamma, ctx.n_total, cfg.seed, depth, lo,
        cfg.sample_rule, par,
    )
    threshold = None
    if depth == 0 and consumed == 0:
        skip, threshold = plan_overflow(samples, w, gamma)
        if skip:
            consumed = skip
            gamma = min(gamma, w - consumed)
            shift = w - consumed - gamma
    heavy = detect_heavy(samples, ctx.n_total)
    return plan_buckets(heavy, gamma, shift, w, threshold), consumed, gamma


def _children_step(ctx, plan, offs, lo, consumed, gamma, depth, o, par):
    """Sort every light bucket on the next digit and the overflow bucket by
    full key.  Returns the child counter reports in deterministic order."""
    cfg = ctx.cfg
    remaining_after = ctx.key_width - consumed - gamma
    # With no digits left below this one, each light bucket is all-equal and
    # already in place; only the overflow bucket still needs work.
    children_done = remaining_after <= 0

    spans: list[tuple[int, int]] = []
    recursions: list[tuple[int, int]] = []
    span_start = span_end = -1

    def flush() -> None:
        nonlocal span_start, span_end
        if span_start >= 0 and span_end > span_start:
            spans.append((span_start, span_end))
        span_start = span_end = -1

    if not children_done:
        for zone in range(plan.nzones):
            b = int(plan.light_ids[zone])
            clo = lo + int(offs[b])
            chi = lo + int(offs[b + 1])
            size = chi - clo
            h0, h1 = plan.heavy_range(zone)
            if size > 0:
                child_gamma = gamma_for(size, remaining_after, cfg)
                if size < cfg.effective_theta(child_gamma):
                    if span_start < 0:
                        span_start = clo
                    span_end = chi
                else:
                    flush()
                    recursions.append((clo, chi))
            if h1 > h0:
                flush()  # heavy buckets interrupt span contiguity
        flush()

    def span_job(a: int, b: int):
        r = InstrumentReport() if cfg.instrument else None
        if r is not None:
            r.add_mass(depth + 1, b - a)
        _base_sort(ctx, o, a, b, r)
        return r

    def child_job(a: int, b: int, inline_par: bool):
        buf, r = _sort_rec(ctx, a, b, consumed + gamma, depth + 1, o, inline_par)
        if buf != o:
            _copy_between(ctx, buf, o, a, b, inline_par)
            if r is not None:
                r.moves += b - a
        return r

    pooled = [(lambda a=a, b=b: span_job(a, b)) for a, b in spans]
    inline = []
    for a, b in recursions:
        if par and b - a >= _INLINE_CHILD_CUTOFF:
            inline.append(lambda a=a, b=b: child_job(a, b, True))
        else:
            pooled.append(lambda a=a, b=b: child_job(a, b, False))

    if plan.overflow_id >= 0:
        alo = lo + int(offs[plan.overflow_id])
        ahi = lo + int(offs[plan.overflow_id + 1])
        if ahi > alo:
            def overflow_job(a=alo, b=ahi):
                r = InstrumentReport() if cfg.instrument else None
                _base_sort(ctx, o, a, b, r)
                return r

            pooled.append(overflow_job)

    results = parallel.run_tasks_mixed(pooled, inline, par)
    return [r for r in results if r is not None]


def _merge_step(ctx, plan, offs, lo, o, src, par):
    """Step 4.  One merge task per zone that has heavy buckets."""
    if ctx.mode == "plain" or not plan.has_heavy:
        return []
    keys_o, keys_s = ctx.keys[o], ctx.keys[src]
    pays_o = ctx.pays[o] if ctx.pays is not None else None
    pays_s = ctx.pays[src] if ctx.pays is not None else None

    def merge_zone(zone: int, h0: int, h1: int):
        b = int(plan.light_ids[zone])
        cnt = h1 - h0
        zlo = lo + int(offs[b])
        zhi = lo + int(offs[b + cnt + 1])
        if zhi == zlo:
            return None
        light_len = int(offs[b + 1] - offs[b])
        heavy_lens = np.diff(offs[b + 1 : b + cnt + 2])
        return dt_merge(
            keys_o[zlo:zhi],
            pays_o[zlo:zhi] if pays_o is not None else None,
            light_len,
            plan.heavy_keys[h0:h1],
            heavy_lens,
            keys_s[zlo:zhi],
            pays_s[zlo:zhi] if pays_s is not None else None,
            validate=False,
        )

    tasks = []
    for zone in range(plan.nzones):
        h0, h1 = plan.heavy_range(zone)
        if h1 > h0:
            tasks.append(lambda z=zone, a=h0, b=h1: merge_zone(z, a, b))
    return [s for s in parallel.run_tasks(tasks, par) if s is not None]
