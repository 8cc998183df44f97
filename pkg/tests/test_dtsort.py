import numpy as np
import pytest

from dovetail import parallel
from dovetail.bench import reference_sort
from dovetail.core import RecordArray, SortConfig
from dovetail.dtsort import dt_sort, plain_msd_sort


def teardown_function(_fn):
    parallel.set_num_workers(None)


def make(keys, width=32, payloads=True):
    dtype = np.uint32 if width == 32 else np.uint64
    keys = np.asarray(keys).astype(dtype, copy=True)  # never alias the input
    pays = np.arange(keys.shape[0], dtype=np.uint64) if payloads else None
    return RecordArray(keys, pays)


def check_both(rec, cfg=None):
    want = reference_sort(rec).tobytes()
    for sorter in (dt_sort, plain_msd_sort):
        work = rec.copy()
        sorter(work, cfg)
        assert work.tobytes() == want, sorter.__name__
    return want


# a cheap config that forces several distribution levels on small inputs
DEEP = SortConfig(gamma_lo=4, gamma_hi=4, base_case_threshold=16)


def test_matches_oracle_across_shapes():
    rng = np.random.default_rng(0)
    for width in (32, 64):
        for n in (0, 1, 2, 17, 1000, 30_000):
            # make() truncates 64-bit draws to the key width
            full = rng.integers(0, (1 << 64) - 1, size=n, dtype=np.uint64, endpoint=True)
            check_both(make(full, width))
            check_both(make(rng.integers(0, 7, size=n), width))  # few values
            check_both(make(np.arange(n), width))  # presorted
            check_both(make(np.arange(n)[::-1], width))  # reversed
            check_both(make(np.full(n, 42), width))  # constant
            check_both(make(np.tile([9, 3], n // 2 + 1)[:n], width))  # two values
    keys64 = rng.integers(0, (1 << 64) - 1, size=5000, dtype=np.uint64, endpoint=True)
    check_both(make(keys64, 64, payloads=False))


def test_deep_recursion_config():
    rng = np.random.default_rng(1)
    for width in (32, 64):
        full = rng.integers(0, (1 << 64) - 1, size=20_000, dtype=np.uint64, endpoint=True)
        check_both(make(full, width), DEEP)
        check_both(make(rng.integers(0, 1000, size=20_000), width), DEEP)
        check_both(make(np.full(20_000, 3), width), DEEP)


def test_stability_direct():
    keys = np.tile(np.array([5, 1, 5, 1, 9], np.uint32), 4000)
    rec = make(keys)
    dt_sort(rec)
    for v in (1, 5, 9):
        group = rec.payloads[rec.keys == v]
        assert np.all(np.diff(group.astype(np.int64)) > 0)


def test_in_place_identity_and_returns():
    rec = make(np.random.default_rng(2).integers(0, 99, size=5000))
    k, p = rec.keys, rec.payloads
    assert dt_sort(rec) is None
    assert rec.keys is k and rec.payloads is p
    rep = dt_sort(rec, SortConfig(instrument=True))
    assert rep is not None and rep.level_mass[0] == 5000
    with pytest.raises(TypeError):
        dt_sort(np.arange(5, dtype=np.uint32))


def test_empty_input_reports():
    rep = plain_msd_sort(make([]), SortConfig(instrument=True))
    assert rep.moves == 0 and rep.levels == 0 and rep.level_mass == [0]


def test_thread_count_invariance():
    rng = np.random.default_rng(3)
    keys = np.concatenate(
        [
            rng.integers(0, 1 << 32, size=150_000, dtype=np.uint64).astype(np.uint32),
            np.full(50_000, 0xDEADBEEF, np.uint32),
        ]
    )
    rng.shuffle(keys)
    cfg = SortConfig(instrument=True)
    baseline = None
    for workers in (1, 2, 8):
        parallel.set_num_workers(workers)
        rec = make(keys)
        rep = dt_sort(rec, cfg)
        got = (rec.tobytes(), rep.structural())
        if baseline is None:
            baseline = got
        else:
            assert got == baseline, f"workers={workers}"


def test_instrument_invariants_random_input():
    rng = np.random.default_rng(4)
    n = 120_000
    rec = make(rng.integers(0, 1 << 32, size=n, dtype=np.uint64).astype(np.uint32))
    rep = dt_sort(rec, SortConfig(instrument=True))
    assert rep.level_mass[0] == n
    assert rep.levels <= -(-32 // 8)  # never more levels than digits
    assert rep.moves <= 3 * max(rep.levels, 1) * n
    for d in range(rep.levels):
        removed = rep.heavy_records_removed[d] if d < len(rep.heavy_records_removed) else 0
        assert rep.level_mass[d + 1] <= rep.level_mass[d] - removed
    assert rep.base_case_records <= n


def test_all_equal_heavy_shortcut():
    n = 200_000
    rec = make(np.full(n, 123_456))
    rep = dt_sort(rec, SortConfig(instrument=True))
    assert np.all(rec.keys == 123_456)
    # one level: every record lands in the single heavy bucket and is done
    assert rep.levels == 1
    assert rep.level_mass[1] == 0
    assert rep.heavy_records_removed[0] == n
    assert rep.moves == 2 * n  # one distribution plus the final copy-back
    assert rep.skipped_bits == 8  # sample max 123456 < 2**24

    rec = make(np.full(n, 123_456))
    prep = plain_msd_sort(rec, SortConfig(instrument=True))
    assert np.all(rec.keys == 123_456)
    assert prep.levels == 4  # the ablation re-distributes the run every digit
    assert prep.moves >= 4 * n


def test_all_zero_keys_skip_cap():
    rec = make(np.zeros(50_000, np.uint32))
    rep = dt_sort(rec, SortConfig(instrument=True))
    assert rep.skipped_bits == 24  # at least one digit must remain
    assert rep.levels == 1


def test_small_keys_skip_leading_digits():
    rng = np.random.default_rng(5)
    rec = make(rng.integers(0, 1 << 16, size=100_000))
    rep = dt_sort(rec, SortConfig(instrument=True))
    assert rep.skipped_bits == 16
    assert np.all(np.diff(rec.keys.astype(np.int64)) >= 0)


def test_overflow_bucket_catches_rare_outliers():
    rng = np.random.default_rng(6)
    base = rng.integers(0, 1 << 12, size=150_000, dtype=np.uint32)
    outliers = np.array([1 << 20, (1 << 32) - 1, 1 << 28], np.uint32)
    saw_skip = False
    for seed in range(12):
        keys = base.copy()
        keys[rng.integers(0, len(keys), size=3)] = outliers
        rec = make(keys)
        want = reference_sort(rec).tobytes()
        rep = dt_sort(rec, SortConfig(seed=seed, instrument=True))
        assert rec.tobytes() == want  # correct whether or not digits were skipped
        if rep.skipped_bits:
            saw_skip = True  # outliers escaped the sample and rode the overflow bucket
            assert rep.skipped_bits == 16  # sample max below 2**16
            assert rep.levels == 1  # ~9.4k records per zone stay under theta
            break
    assert saw_skip


def test_merge_traffic_on_planted_heavy_keys():
    rng = np.random.default_rng(7)
    n = 100_000
    keys = rng.integers(0, 1 << 32, size=n, dtype=np.uint64).astype(np.uint32)
    keys[: n // 3] = 0x12345678  # heavy key sharing a zone with light records
    rng.shuffle(keys)
    rec = make(keys)
    want = reference_sort(rec).tobytes()
    rep = dt_sort(rec, SortConfig(instrument=True))
    assert rec.tobytes() == want
    assert rep.merge_out_copies > 0
    assert rep.heavy_records_removed[0] >= n // 3


def test_theory_mode_threshold():
    rng = np.random.default_rng(8)
    cfg = SortConfig(theory_mode=True, base_case_exponent=2, gamma_lo=4, gamma_hi=4,
                     instrument=True)
    rec = make(rng.integers(0, 1 << 32, size=40_000, dtype=np.uint64).astype(np.uint32))
    want = reference_sort(rec).tobytes()
    rep = dt_sort(rec, cfg)
    assert rec.tobytes() == want
    assert rep.levels >= 2  # theta = 2**8 keeps recursion alive past one level


def test_sample_rule_override_disables_sampling():
    rng = np.random.default_rng(9)
    keys = rng.integers(0, 50, size=30_000, dtype=np.uint64).astype(np.uint32)
    rec = make(keys)
    # an absurd sample demand makes every level fall back to plain buckets
    cfg = SortConfig(sample_rule=lambda n, g, t: 10**9, instrument=True)
    rep = dt_sort(rec, cfg)
    assert np.all(np.diff(rec.keys.astype(np.int64)) >= 0)
    assert rep.merge_out_copies == 0 and rep.skipped_bits == 0
    assert not rep.heavy_records_removed or sum(rep.heavy_records_removed) == 0


def test_inline_child_path():
    # one zone fat enough to be sorted inline in the calling thread
    rng = np.random.default_rng(10)
    n = 400_000
    keys = (np.uint32(5) << np.uint32(24)) | rng.integers(
        0, 1 << 24, size=n, dtype=np.uint64
    ).astype(np.uint32)
    keys[: n // 10] = rng.integers(0, 1 << 32, size=n // 10, dtype=np.uint64).astype(np.uint32)
    rng.shuffle(keys)
    parallel.set_num_workers(4)
    rec = make(keys)
    want = reference_sort(rec).tobytes()
    rep4 = dt_sort(rec, SortConfig(instrument=True))
    assert rec.tobytes() == want
    parallel.set_num_workers(1)
    rec1 = make(keys)
    rep1 = dt_sort(rec1, SortConfig(instrument=True))
    assert rec1.tobytes() == want
    assert rep1.structural() == rep4.structural()
