"""Synthetic record generators and the on-disk dataset format.

Four key distributions, chosen to stress different sorter behaviors:

- ``uniform``: uniform over ``mu`` preselected distinct keys (duplicate-heavy
  for small ``mu``, nearly distinct for large).
- ``exp``: exponential with rate ``1e-5 * lam``, rounded to integer (smooth
  skew, long runs of small keys).
- ``zipf``: rank ``k`` in ``[1, n]`` with probability proportional to
  ``k**-s`` (few very frequent keys, heavy tail).
- ``bexp``: each key bit is zero with probability ``1/t`` independently
  (structured bit-level skew rather than value-level skew).

Uniform, exponential, and zipfian values are spread over the full key width
through a seed-derived odd-multiplier bijection, so key magnitudes carry no
information but duplicate structure is preserved exactly.

Generation is chunked, one random stream per chunk index, so output depends
only on ``(spec, seed)`` — never on chunk scheduling or thread count.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import KEY_DTYPES, RecordArray, rng_stream

__all__ = [
    "DistSpec",
    "generate",
    "generate_edges",
    "read_dataset",
    "write_dataset",
]

_FAMILIES = ("uniform", "exp", "zipf", "bexp")
_GEN_CHUNK = 1 << 16
# Stream id for the bijection multiplier; chunk streams use small indices, the
# sorter's sampling streams set bit 60, so the three uses never collide.
_BIJECTION_STREAM = 1 << 59

_MAGIC = b"ISRT"
_VERSION = 1
_HEADER = struct.Struct("<4sBBBBQ")  # magic, version, key bits, payload bytes, reserved, count


@dataclass(frozen=True)
class DistSpec:
    """One synthetic dataset: distribution family, parameter, size, width, seed."""

    family: str
    param: float
    n: int
    key_width: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.key_width not in KEY_DTYPES:
            raise ValueError("key_width must be 32 or 64")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        p = self.param
        if self.family == "uniform":
            if p < 1 or p != int(p):
                raise ValueError("uniform needs an integer key count >= 1")
            if int(p) > 2**self.key_width:
                raise ValueError("uniform key count exceeds the key space")
        elif self.family == "exp":
            if not p > 0:
                raise ValueError("exp needs a rate multiplier > 0")
        elif self.family == "zipf":
            if not p > 0:
                raise ValueError("zipf needs an exponent > 0")
        elif p < 1:
            raise ValueError("bexp needs odds >= 1")


def _bijection_multiplier(seed: int, key_width: int) -> int:
    """Seed-derived odd multiplier; odd means multiplication mod 2**width is
    a bijection, so distinct inputs stay distinct."""
    rng = rng_stream(seed, _BIJECTION_STREAM)
    return (int(rng.integers(0, 2**64, dtype=np.uint64)) | 1) & ((1 << key_width) - 1)


def _spread(values: np.ndarray, mult: int, key_width: int) -> np.ndarray:
    mixed = values.astype(np.uint64) * np.uint64(mult)
    if key_width == 32:
        return (mixed & np.uint64(0xFFFF_FFFF)).astype(np.uint32)
    return mixed


def _helper1(t: np.ndarray) -> np.ndarray:
    """``log1p(t) / t`` with the t -> 0 limit handled."""
    t = np.asarray(t, dtype=np.float64)
    small = np.abs(t) <= 1e-8
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0 - t / 2.0 + t * t / 3.0, np.log1p(safe) / safe)


def _helper2(t: np.ndarray) -> np.ndarray:
    """``expm1(t) / t`` with the t -> 0 limit handled."""
    t = np.asarray(t, dtype=np.float64)
    small = np.abs(t) <= 1e-8
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0 + t / 2.0 + t * t / 6.0, np.expm1(safe) / safe)


class _ZipfSampler:
    """Rejection-inversion sampler for P(k) proportional to k**-s on [1, N].

    Inverts the integral of the density's continuous extension and accepts
    with probability proportional to the gap between the density and its
    hull, which stays bounded away from zero for every s > 0, so the
    expected number of rounds per draw is O(1).
    """

    def __init__(self, s: float, n_elements: int):
        if n_elements < 1:
            raise ValueError("need at least one element")
        self.s = float(s)
        self.n = float(n_elements)
        self._h_x1 = self._h_integral(np.float64(1.5)) - 1.0
        self._h_n = self._h_integral(np.float64(self.n + 0.5))
        self._s_val = float(
            2.0 - self._h_integral_inverse(self._h_integral(np.float64(2.5)) - self._h(np.float64(2.0)))
        )

    def _h(self, x):
        return np.exp(-self.s * np.log(x))

    def _h_integral(self, x):
        logx = np.log(x)
        return _helper2((1.0 - self.s) * logx) * logx

    def _h_integral_inverse(self, x):
        t = np.maximum(x * (1.0 - self.s), -1.0)
        return np.exp(_helper1(t) * x)

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` ranks in [1, N]; deterministic in the stream state."""
        out = np.empty(count, dtype=np.int64)
        pending = np.arange(count)
        while pending.size:
            u = self._h_n + rng.random(pending.size) * (self._h_x1 - self._h_n)
            x = self._h_integral_inverse(u)
            k = np.clip(np.floor(x + 0.5), 1.0, self.n)
            accept = (k - x <= self._s_val) | (u >= self._h_integral(k + 0.5) - self._h(k))
            out[pending[accept]] = k[accept].astype(np.int64)
            pending = pending[~accept]
        return out


def _chunks(n: int, seed: int):
    for index, start in enumerate(range(0, n, _GEN_CHUNK)):
        yield start, min(start + _GEN_CHUNK, n), rng_stream(seed, index)


def generate(spec: DistSpec) -> RecordArray:
    """Produce ``spec.n`` records; payload i is the record's original index."""
    n = int(spec.n)
    w = spec.key_width
    keys = np.empty(n, dtype=KEY_DTYPES[w])
    mult = _bijection_multiplier(spec.seed, w)
    zipf = _ZipfSampler(spec.param, max(n, 1)) if spec.family == "zipf" else None
    max_key = (1 << w) - 1
    for lo, hi, rng in _chunks(n, spec.seed):
        m = hi - lo
        if spec.family == "uniform":
            # Inclusive upper bound so the full 2**64 key space stays legal.
            picks = rng.integers(0, int(spec.param) - 1, size=m, dtype=np.uint64, endpoint=True)
            keys[lo:hi] = _spread(picks, mult, w)
        elif spec.family == "exp":
            raw = np.rint(rng.exponential(scale=1e5 / spec.param, size=m))
            clipped = np.minimum(raw, float(max_key)).astype(np.uint64)
            keys[lo:hi] = _spread(clipped, mult, w)
        elif spec.family == "zipf":
            ranks = zipf.draw(rng, m).astype(np.uint64)
            keys[lo:hi] = _spread(ranks, mult, w)
        else:  # bexp: each bit set with probability 1 - 1/t, low bit first
            acc = np.zeros(m, dtype=np.uint64)
            zero_p = 1.0 / spec.param
            for bit in range(w):
                acc |= (rng.random(m) >= zero_p).astype(np.uint64) << np.uint64(bit)
            keys[lo:hi] = acc.astype(KEY_DTYPES[w])
    return RecordArray(keys, np.arange(n, dtype=np.uint64))


def generate_edges(
    vertices: int, edges: int, degree_skew: float, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Directed edge list ``(sources, destinations)`` as uint32 arrays.

    Sources are uniform over the vertex set; destination frequencies follow
    a Zipf law with exponent ``degree_skew``, so a handful of vertices have
    very large in-degree.  Deterministic in the seed.
    """
    if not 1 <= vertices <= 2**32:
        raise ValueError("vertices must be in [1, 2**32]")
    if edges < 0:
        raise ValueError("edges must be >= 0")
    src = np.empty(edges, dtype=np.uint32)
    dst = np.empty(edges, dtype=np.uint32)
    zipf = _ZipfSampler(degree_skew, vertices)
    for lo, hi, rng in _chunks(edges, seed):
        m = hi - lo
        src[lo:hi] = rng.integers(0, vertices, size=m, dtype=np.uint64).astype(np.uint32)
        dst[lo:hi] = (zipf.draw(rng, m) - 1).astype(np.uint32)
    return src, dst


def write_dataset(path, records: RecordArray, payload_width: int | None = None) -> None:
    """Write records to ``path`` in the binary dataset format.

    ``payload_width`` is bytes per payload (0, 4, or 8); the default stores
    payloads at full width when present and omits them otherwise.
    """
    if payload_width is None:
        payload_width = 0 if records.payloads is None else 8
    if payload_width not in (0, 4, 8):
        raise ValueError("payload_width must be 0, 4, or 8")
    if payload_width and records.payloads is None:
        raise ValueError("records carry no payloads to write")
    n = len(records)
    key_bytes = records.key_width // 8
    header = _HEADER.pack(_MAGIC, _VERSION, records.key_width, payload_width, 0, n)
    if payload_width == 0:
        body = np.ascontiguousarray(records.keys).tobytes()
    else:
        rec = np.empty(n, dtype=np.dtype([("key", f"<u{key_bytes}"), ("pay", f"<u{payload_width}")]))
        rec["key"] = records.keys
        if payload_width == 4:
            if records.payloads.size and int(records.payloads.max()) > 0xFFFF_FFFF:
                raise ValueError("payloads do not fit in 4 bytes")
            rec["pay"] = records.payloads.astype(np.uint32)
        else:
            rec["pay"] = records.payloads
        body = rec.tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_dataset(path) -> tuple[RecordArray, int]:
    """Read a dataset file; returns ``(records, payload_width_bytes)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("dataset file truncated before header")
    magic, version, key_width, payload_width, _, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a dataset file (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    if key_width not in KEY_DTYPES:
        raise ValueError(f"unsupported key width {key_width}")
    if payload_width not in (0, 4, 8):
        raise ValueError(f"unsupported payload width {payload_width}")
    key_bytes = key_width // 8
    expected = _HEADER.size + count * (key_bytes + payload_width)
    if len(raw) != expected:
        raise ValueError(f"dataset length mismatch: expected {expected} bytes, got {len(raw)}")
    if payload_width == 0:
        keys = np.frombuffer(raw, dtype=KEY_DTYPES[key_width], offset=_HEADER.size).copy()
        return RecordArray(keys), 0
    rec = np.frombuffer(
        raw,
        dtype=np.dtype([("key", f"<u{key_bytes}"), ("pay", f"<u{payload_width}")]),
        offset=_HEADER.size,
    )
    keys = np.ascontiguousarray(rec["key"])
    pays = rec["pay"].astype(np.uint64)
    return RecordArray(keys, pays), payload_width
