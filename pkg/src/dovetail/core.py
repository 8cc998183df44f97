"""Core types for the sorting pipeline.

Conventions
-----------
* Keys are unsigned 32- or 64-bit integers stored in numpy arrays.
* A record is a key plus an optional opaque 64-bit payload that travels with
  the key unchanged; sorting never inspects payload bits.
* Digits are read most-significant first.  With digit width ``g``, digit
  ``d`` of a ``w``-bit key covers bits ``[w-(d+1)*g, w-d*g)``.
* All randomness flows through :func:`rng_stream`.  Streams are counter-based
  (Philox) and keyed by ``(seed, stream_id)``, so a draw depends only on that
  pair, never on thread scheduling or draw interleaving elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "KEY_DTYPES",
    "RecordArray",
    "SortConfig",
    "InstrumentReport",
    "rng_stream",
    "gamma_for",
    "ceil_log2",
]

KEY_DTYPES = {32: np.dtype("<u4"), 64: np.dtype("<u8")}
_PAYLOAD_DTYPE = np.dtype("<u8")

# Reusable zero-length payload stand-in for keys-only data.
EMPTY_PAYLOADS = np.empty(0, dtype=_PAYLOAD_DTYPE)


@dataclass
class RecordArray:
    """A column-oriented batch of records: keys plus optional payloads.

    ``keys`` must be uint32 or uint64.  ``payloads`` is either ``None`` or a
    uint64 array of the same length.  Payloads are opaque: every operation
    moves them with their keys and never reads their values.
    """

    keys: np.ndarray
    payloads: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.keys.dtype not in (np.dtype(np.uint32), np.dtype(np.uint64)):
            raise ValueError(f"keys must be uint32 or uint64, got {self.keys.dtype}")
        if self.keys.ndim != 1:
            raise ValueError("keys must be one-dimensional")
        if self.payloads is not None:
            if self.payloads.dtype != np.dtype(np.uint64):
                raise ValueError("payloads must be uint64")
            if self.payloads.shape != self.keys.shape:
                raise ValueError("payloads must match keys in length")

    @property
    def key_width(self) -> int:
        return int(self.keys.dtype.itemsize * 8)

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    def copy(self) -> "RecordArray":
        return RecordArray(
            self.keys.copy(),
            None if self.payloads is None else self.payloads.copy(),
        )

    def tobytes(self) -> bytes:
        """Canonical byte image (keys then payloads), used by equality checks."""
        if self.payloads is None:
            return self.keys.tobytes()
        return self.keys.tobytes() + self.payloads.tobytes()


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Return the deterministic random stream for ``(seed, stream_id)``.

    Built on the counter-based Philox generator with the pair as its key, so
    the same pair always yields the same draws on any thread count, and
    distinct stream ids yield statistically independent streams.
    """
    seed = int(seed)
    stream_id = int(stream_id)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    if not 0 <= stream_id < 2**64:
        raise ValueError("stream_id must fit in an unsigned 64-bit integer")
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def ceil_log2(n: int) -> int:
    """Smallest ``k`` with ``2**k >= n``, and at least 1."""
    n = int(n)
    if n <= 2:
        return 1
    return (n - 1).bit_length()


@dataclass(frozen=True)
class SortConfig:
    """Tuning knobs for the sorters.

    The digit width gamma for a subproblem of ``n'`` records is
    ``min(remaining_bits, clamp(floor(log2(n') / 3), gamma_lo, gamma_hi))``.
    A subproblem smaller than the base-case threshold is finished with a
    stable comparison sort instead of another distribution pass.  In theory
    mode the threshold is ``2 ** (base_case_exponent * gamma)`` instead of
    the fixed ``base_case_threshold``.
    """

    seed: int = 0
    gamma_lo: int = 8
    gamma_hi: int = 12
    base_case_threshold: int = 1 << 14
    theory_mode: bool = False
    base_case_exponent: int = 2
    # (n_prime, gamma, n_total) -> sample count; None selects the default rule
    # min(n', 2**gamma * ceil_log2(n_total)).
    sample_rule: Callable[[int, int, int], int] | None = None
    # (n_prime, nbuckets, workers) -> block count; None selects the default.
    block_policy: Callable[[int, int, int], int] | None = None
    parallel_grain: int = 4096
    instrument: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.gamma_lo <= self.gamma_hi <= 16:
            raise ValueError("need 1 <= gamma_lo <= gamma_hi <= 16")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.parallel_grain < 1:
            raise ValueError("parallel_grain must be >= 1")
        if self.theory_mode:
            if self.base_case_exponent < 1:
                raise ValueError("base_case_exponent must be >= 1")
        elif self.base_case_threshold < (1 << self.gamma_hi):
            # The threshold must dominate the bucket count at every level,
            # otherwise a distribution pass could be cheaper than its own
            # bookkeeping and the work bound no longer holds.
            raise ValueError("base_case_threshold must be >= 2**gamma_hi")

    def effective_theta(self, gamma: int) -> int:
        if self.theory_mode:
            return 1 << (self.base_case_exponent * gamma)
        return self.base_case_threshold


def gamma_for(n_prime: int, remaining_bits: int, cfg: SortConfig) -> int:
    """Digit width for a subproblem of ``n_prime`` records.

    Pure integer math: ``floor(log2(n')/3)`` is computed from the bit length
    so repeated calls are exact and platform independent.
    """
    if remaining_bits < 1:
        raise ValueError("remaining_bits must be >= 1")
    raw = (max(int(n_prime), 1).bit_length() - 1) // 3
    clamped = min(cfg.gamma_hi, max(cfg.gamma_lo, raw))
    return max(1, min(int(remaining_bits), clamped))


@dataclass
class InstrumentReport:
    """Structural counters for one sort invocation.

    ``moves`` counts record writes to either buffer: distribution scatters,
    base-case permutation writes, merge traffic, buffer-coercion copies, and
    the final copy-back.  Sample arrays hold bare keys, not records, so
    sampling never counts.  ``level_mass[d]`` is the total number of records
    entering subproblems at recursion depth ``d``; ``levels`` is the number
    of depths at which a distribution pass ran.  All counters are exact and
    identical across worker-thread counts.
    """

    moves: int = 0
    merge_out_copies: int = 0
    merge_in_array_moves: int = 0
    levels: int = 0
    level_mass: list[int] = field(default_factory=list)
    base_case_records: int = 0
    heavy_records_removed: list[int] = field(default_factory=list)
    skipped_bits: int = 0

    def _ensure(self, seq: list[int], depth: int) -> None:
        while len(seq) <= depth:
            seq.append(0)

    def add_mass(self, depth: int, count: int) -> None:
        self._ensure(self.level_mass, depth)
        self.level_mass[depth] += count

    def add_heavy_removed(self, depth: int, count: int) -> None:
        self._ensure(self.heavy_records_removed, depth)
        self.heavy_records_removed[depth] += count

    def note_distribution(self, depth: int) -> None:
        self.levels = max(self.levels, depth + 1)

    def merge_from(self, other: "InstrumentReport") -> None:
        self.moves += other.moves
        self.merge_out_copies += other.merge_out_copies
        self.merge_in_array_moves += other.merge_in_array_moves
        self.levels = max(self.levels, other.levels)
        self.base_case_records += other.base_case_records
        self.skipped_bits = max(self.skipped_bits, other.skipped_bits)
        for d, m in enumerate(other.level_mass):
            self.add_mass(d, m)
        for d, h in enumerate(other.heavy_records_removed):
            self.add_heavy_removed(d, h)

    def structural(self) -> tuple:
        """Counters that must match exactly across thread counts."""
        return (
            self.moves,
            self.merge_out_copies,
            self.merge_in_array_moves,
            self.levels,
            tuple(self.level_mass),
            self.base_case_records,
            tuple(self.heavy_records_removed),
            self.skipped_bits,
        )
