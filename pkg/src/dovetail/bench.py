"""Command-line harness: generate, sort, verify, benchmark, sanity-check.

The verification oracle here is an independent bottom-up stable mergesort
written directly against the record arrays.  It shares no code with the
sorters' machinery on purpose: a bug in the library cannot hide inside its
own checker.

Subcommands:

- ``gen``: write a synthetic dataset file (payload = original index).
- ``sort``: sort a dataset file with one algorithm, optionally verifying
  against the oracle and writing the result.
- ``bench``: run the full distribution grid, timing every algorithm and
  emitting one verified CSV row per (algorithm, distribution, parameter).
- ``verify``: check that a dataset file IS a correct stable sort output
  (negative control for the whole pipeline).
- ``transpose-demo``: build a graph transpose by stably sorting an edge list
  by destination vertex and validate it.
- ``theory-check``: instrumented runs on full-range uniform input; asserts
  the record-move and recursion-depth accounting stays within its bounds.
"""
from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import parallel
from .core import InstrumentReport, RecordArray, SortConfig, gamma_for
from .dtsort import dt_sort, plain_msd_sort
from .gen import DistSpec, generate, generate_edges, read_dataset, write_dataset

__all__ = [
    "RunResult",
    "main",
    "predicted_levels",
    "reference_sort",
    "verify_against_input",
]

CSV_HEADER = "algo,dist,param,n,bits,threads,seed,time_ms,verified,moves,levels,merge_out_copies"

_GRID = (
    ("uniform", (10.0, 1e3, 1e5, 1e7, 1e9)),
    ("exp", (1.0, 2.0, 5.0, 7.0, 10.0)),
    ("zipf", (0.6, 0.8, 1.0, 1.2, 1.5)),
    ("bexp", (10.0, 30.0, 50.0, 100.0, 300.0)),
)
_ALGOS = ("dtsort", "plain", "baseline")


# --- reference oracle ------------------------------------------------------

@njit(nogil=True, cache=True)
def _merge_pass(src_k, src_p, dst_k, dst_p, width, has_pay):
    n = src_k.shape[0]
    lo = 0
    while lo < n:
        mid = min(lo + width, n)
        hi = min(lo + 2 * width, n)
        i, j, k = lo, mid, lo
        while i < mid and j < hi:
            if src_k[j] < src_k[i]:  # strict: ties take the left run first
                dst_k[k] = src_k[j]
                if has_pay:
                    dst_p[k] = src_p[j]
                j += 1
            else:
                dst_k[k] = src_k[i]
                if has_pay:
                    dst_p[k] = src_p[i]
                i += 1
            k += 1
        while i < mid:
            dst_k[k] = src_k[i]
            if has_pay:
                dst_p[k] = src_p[i]
            i += 1
            k += 1
        while j < hi:
            dst_k[k] = src_k[j]
            if has_pay:
                dst_p[k] = src_p[j]
            j += 1
            k += 1
        lo = hi


def reference_sort(records: RecordArray) -> RecordArray:
    """Sequential bottom-up stable mergesort; returns a new RecordArray."""
    n = len(records)
    has_pay = records.payloads is not None
    a_k = records.keys.copy()
    a_p = records.payloads.copy() if has_pay else np.empty(0, dtype=np.uint64)
    b_k = np.empty_like(a_k)
    b_p = np.empty_like(a_p)
    width = 1
    while width < n:
        _merge_pass(a_k, a_p, b_k, b_p, width, has_pay)
        a_k, b_k = b_k, a_k
        a_p, b_p = b_p, a_p
        width *= 2
    return RecordArray(a_k, a_p if has_pay else None)


def verify_against_input(output: RecordArray, original: RecordArray) -> bool:
    """True iff ``output`` is exactly the oracle's stable sort of ``original``."""
    return output.tobytes() == reference_sort(original).tobytes()


# --- bench plumbing --------------------------------------------------------

@dataclass
class RunResult:
    algo: str
    dist: str
    param: float
    n: int
    bits: int
    threads: int
    seed: int
    time_ms: float
    verified: bool
    report: InstrumentReport | None = None

    def csv_row(self) -> str:
        rep = self.report
        return ",".join(
            (
                self.algo,
                self.dist,
                _fmt_param(self.param),
                str(self.n),
                str(self.bits),
                str(self.threads),
                str(self.seed),
                f"{self.time_ms:.3f}",
                "true" if self.verified else "false",
                str(rep.moves if rep else 0),
                str(rep.levels if rep else 0),
                str(rep.merge_out_copies if rep else 0),
            )
        )


def _fmt_param(p: float) -> str:
    return str(int(p)) if float(p) == int(p) else str(p)


def _sorter(algo: str):
    if algo == "dtsort":
        return dt_sort
    if algo == "plain":
        return plain_msd_sort
    raise ValueError(f"unknown algorithm {algo!r}")


def _run_one(algo: str, data: RecordArray, cfg: SortConfig) -> tuple[RecordArray, float, InstrumentReport | None]:
    """Sort a private copy; returns (output, wall ms, report or None)."""
    work = data.copy()
    if algo == "baseline":
        t0 = time.perf_counter()
        out = reference_sort(work)
        return out, (time.perf_counter() - t0) * 1e3, None
    t0 = time.perf_counter()
    rep = _sorter(algo)(work, cfg)
    return work, (time.perf_counter() - t0) * 1e3, rep


def _time_algo(
    algo: str, data: RecordArray, cfg: SortConfig, repeat: int
) -> tuple[float, bool, InstrumentReport | None]:
    """Median wall time of the last ``repeat - 1`` runs, each verified."""
    want = reference_sort(data).tobytes()
    times = []
    for _ in range(max(repeat, 1)):
        out, ms, _ = _run_one(algo, data, cfg)
        if out.tobytes() != want:
            return 0.0, False, None
        times.append(ms)
    rep = None
    if algo != "baseline":
        inst_cfg = _with_instrument(cfg)
        _, _, rep = _run_one(algo, data, inst_cfg)
    med = statistics.median(times[1:]) if len(times) > 1 else times[0]
    return med, True, rep


def _with_instrument(cfg: SortConfig) -> SortConfig:
    from dataclasses import replace

    return replace(cfg, instrument=True)


def predicted_levels(n: int, key_width: int, cfg: SortConfig, skipped_bits: int = 0) -> int:
    """Distribution passes a perfectly-balanced run of ``n`` records makes.

    Replays the digit-width policy on the expected subproblem size
    (``n >> gamma`` per level), which matches instrumented ``levels`` for
    full-range uniform inputs where every bucket lands near the mean.
    """
    remaining = key_width - skipped_bits
    n_prime = int(n)
    levels = 0
    while remaining > 0 and n_prime > 0:
        gamma = gamma_for(n_prime, remaining, cfg)
        if n_prime < cfg.effective_theta(gamma):
            break
        levels += 1
        remaining -= gamma
        n_prime >>= gamma
    return levels


# --- thread / config helpers ----------------------------------------------

def _apply_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("ISRT_THREADS")
        threads = int(env) if env else None
    parallel.set_num_workers(threads)
    return parallel.num_workers()


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


# --- subcommands ------------------------------------------------------------

def _cmd_gen(args) -> int:
    spec = DistSpec(args.dist, args.param, args.n, args.bits, args.seed)
    write_dataset(args.out, generate(spec), payload_width=8)
    print(f"wrote {args.n} {args.bits}-bit records ({args.dist} {_fmt_param(args.param)}) to {args.out}")
    return 0


def _cmd_sort(args) -> int:
    try:
        records, payload_width = read_dataset(args.infile)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    threads = _apply_threads(args.threads)
    cfg = SortConfig(seed=args.seed, instrument=args.instrument)
    original = records.copy() if args.verify else None
    if args.algo == "baseline":
        t0 = time.perf_counter()
        records = reference_sort(records)
        ms = (time.perf_counter() - t0) * 1e3
        rep = None
    else:
        t0 = time.perf_counter()
        rep = _sorter(args.algo)(records, cfg)
        ms = (time.perf_counter() - t0) * 1e3
    verified = None
    if args.verify:
        verified = verify_against_input(records, original)
    line = f"{args.algo}: n={len(records)} bits={records.key_width} threads={threads} time_ms={ms:.3f}"
    if verified is not None:
        line += f" verified={'ok' if verified else 'FAILED'}"
    print(line)
    if rep is not None and args.instrument:
        print(
            f"  moves={rep.moves} levels={rep.levels} level_mass={rep.level_mass}"
            f" merge_out_copies={rep.merge_out_copies} skipped_bits={rep.skipped_bits}"
        )
    if args.out:
        write_dataset(args.out, records, payload_width=payload_width)
    return 0 if verified in (None, True) else 1


def _cmd_bench(args) -> int:
    bits = 32 if args.preset == "grid32" else 64
    threads = _apply_threads(args.threads)
    cfg = SortConfig(seed=args.seed)
    rows = []
    for dist, params in _GRID:
        for param in params:
            data = generate(DistSpec(dist, param, args.n, bits, args.seed))
            for algo in _ALGOS:
                ms, ok, rep = _time_algo(algo, data, cfg, args.repeat)
                if not ok:
                    return _fail(f"verification failed: {algo} on {dist} {_fmt_param(param)}")
                rows.append(
                    RunResult(algo, dist, param, args.n, bits, threads, args.seed, ms, ok, rep)
                )
                print(f"{algo:<8} {dist:<8} {_fmt_param(param):>12}  {ms:10.3f} ms  verified")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(row.csv_row() + "\n")
        print(f"wrote {len(rows)} rows to {args.csv}")
    return 0


def _cmd_verify(args) -> int:
    try:
        records, _ = read_dataset(args.infile)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    n = len(records)
    keys = records.keys
    if n and not bool(np.all(keys[:-1] <= keys[1:])):
        return _fail("keys are not in nondecreasing order")
    if records.payloads is None:
        print("order check passed (no payloads: permutation and stability unchecked)")
        return 0
    pays = records.payloads
    if n and (int(pays.max()) >= n or np.unique(pays).size != n):
        return _fail("payloads are not a permutation of the original indices")
    eq = keys[1:] == keys[:-1]
    if n and not bool(np.all(pays[1:][eq] > pays[:-1][eq])):
        return _fail("equal keys are not in original (stable) order")
    # Round trip: rebuild the pre-sort input from the index payloads, sort it
    # with the requested algorithm, and demand the exact same bytes.
    original = np.empty_like(keys)
    original[pays] = keys
    rebuilt = RecordArray(original, np.arange(n, dtype=np.uint64))
    if args.algo == "baseline":
        resorted = reference_sort(rebuilt)
    else:
        _apply_threads(args.threads)
        _sorter(args.algo)(rebuilt, SortConfig(seed=args.seed))
        resorted = rebuilt
    if resorted.tobytes() != records.tobytes():
        return _fail("file does not match a stable sort of its reconstructed input")
    print(f"verified: stable sort output of {n} records (checked with {args.algo})")
    return 0


def _cmd_transpose(args) -> int:
    threads = _apply_threads(args.threads)
    src, dst = generate_edges(args.vertices, args.edges, args.skew, args.seed)
    # Transposing means regrouping edges by destination; stability keeps each
    # destination's sources in input order, which is what CSR builders need.
    records = RecordArray(dst.copy(), np.arange(args.edges, dtype=np.uint64))
    want = reference_sort(records).tobytes()
    cfg = SortConfig(seed=args.seed)
    dt_sort(records, cfg)
    ok = records.tobytes() == want
    sources_by_dst = src[records.payloads]
    degrees = np.bincount(records.keys, minlength=args.vertices)
    row_ptr = np.concatenate(([0], np.cumsum(degrees)))
    print(
        f"transposed {args.edges} edges over {args.vertices} vertices"
        f" (threads={threads}); max in-degree {int(degrees.max()) if args.edges else 0}"
    )
    for v in range(min(args.vertices, args.show)):
        lo, hi = int(row_ptr[v]), int(row_ptr[v + 1])
        head = ", ".join(str(int(s)) for s in sources_by_dst[lo : min(hi, lo + 8)])
        more = " ..." if hi - lo > 8 else ""
        print(f"  in[{v}] ({hi - lo} edges): {head}{more}")
    print(f"stability check: {'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


def _cmd_theory(args) -> int:
    threads = _apply_threads(args.threads)
    cfg = SortConfig(seed=args.seed, instrument=True)
    failures = 0
    print(f"bits={args.bits} threads={threads} seed={args.seed}")
    print(f"{'n':>12} {'levels':>7} {'predicted':>9} {'moves':>14} {'moves/n':>8} {'bound':>6}")
    for n in args.sizes:
        data = generate(DistSpec("uniform", float(2**args.bits), n, args.bits, args.seed))
        rep = dt_sort(data, cfg)
        active_bits = args.bits - rep.skipped_bits
        want_levels = predicted_levels(n, args.bits, cfg, rep.skipped_bits)
        per_rec = rep.moves / n if n else 0.0
        # A pure base case (levels = 0) still writes each record once, so the
        # move bound is taken over at least one level.
        bound = 3 * max(rep.levels, 1)
        ok = rep.levels == want_levels and rep.moves <= bound * n
        ok = ok and rep.levels <= -(-active_bits // cfg.gamma_lo)
        failures += 0 if ok else 1
        flag = "" if ok else "  FAIL"
        print(
            f"{n:>12} {rep.levels:>7} {want_levels:>9} {rep.moves:>14}"
            f" {per_rec:>8.2f} {bound:>6}{flag}"
        )
    if failures:
        return _fail(f"{failures} size(s) violated the accounting bounds")
    print("accounting bounds hold on all sizes")
    return 0


# --- argument parsing -------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dovetail",
        description="Stable parallel integer sorting: datasets, benchmarks, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset file")
    p.add_argument("--dist", required=True, choices=[d for d, _ in _GRID])
    p.add_argument("--param", required=True, type=float)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--bits", type=int, default=32, choices=(32, 64))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("sort", help="sort a dataset file")
    p.add_argument("--algo", default="dtsort", choices=_ALGOS)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--instrument", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sort)

    p = sub.add_parser("bench", help="run the full distribution grid and emit CSV")
    p.add_argument("--preset", required=True, choices=("grid32", "grid64"))
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=6)
    p.add_argument("--csv", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify", help="check that a file is a stable sort output")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--algo", default="baseline", choices=_ALGOS)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("transpose-demo", help="graph transpose via stable sort by destination")
    p.add_argument("--vertices", type=int, required=True)
    p.add_argument("--edges", type=int, required=True)
    p.add_argument("--skew", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--show", type=int, default=4)
    p.set_defaults(func=_cmd_transpose)

    p = sub.add_parser("theory-check", help="instrumented move/level accounting checks")
    p.add_argument("--bits", type=int, default=32, choices=(32, 64))
    p.add_argument(
        "--sizes", type=int, nargs="+", default=[100_000, 1_000_000, 10_000_000]
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_theory)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
