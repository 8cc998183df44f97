from itertools import product

import numpy as np
import pytest

from dovetail import parallel
from dovetail.bench import (
    CSV_HEADER,
    RunResult,
    main,
    predicted_levels,
    reference_sort,
    verify_against_input,
)
from dovetail.core import RecordArray, SortConfig
from dovetail.gen import read_dataset, write_dataset


def teardown_function(_fn):
    parallel.set_num_workers(None)


def python_sorted(rec):
    """Trivially-correct route: CPython's stable sorted() on (key, payload)."""
    pairs = sorted(zip(rec.keys.tolist(), rec.payloads.tolist()), key=lambda kp: kp[0])
    keys = np.array([k for k, _ in pairs], dtype=rec.keys.dtype)
    pays = np.array([p for _, p in pairs], dtype=np.uint64)
    return RecordArray(keys, pays)


def test_reference_sort_matches_python_sorted_exhaustive():
    for n in range(7):
        for combo in product(range(3), repeat=n):
            rec = RecordArray(
                np.array(combo, np.uint32), np.arange(n, dtype=np.uint64)
            )
            got = reference_sort(rec)
            want = python_sorted(rec)
            assert np.array_equal(got.keys, want.keys)
            assert np.array_equal(got.payloads, want.payloads)


def test_reference_sort_matches_python_sorted_random():
    rng = np.random.default_rng(0)
    for trial in range(40):
        n = int(rng.integers(0, 5000))
        dtype = np.uint32 if trial % 2 else np.uint64
        keys = rng.integers(0, 50 if trial % 3 else 1 << 31, size=n).astype(dtype)
        rec = RecordArray(keys, np.arange(n, dtype=np.uint64))
        got = reference_sort(rec)
        want = python_sorted(rec)
        assert np.array_equal(got.keys, want.keys)
        assert np.array_equal(got.payloads, want.payloads)
    # input must not be mutated
    keys = rng.integers(0, 9, size=100).astype(np.uint32)
    rec = RecordArray(keys.copy(), np.arange(100, dtype=np.uint64))
    reference_sort(rec)
    assert np.array_equal(rec.keys, keys)


def test_verify_against_input_detects_tampering():
    rng = np.random.default_rng(1)
    keys = rng.integers(0, 40, size=3000).astype(np.uint32)
    original = RecordArray(keys, np.arange(3000, dtype=np.uint64))
    good = reference_sort(original)
    assert verify_against_input(good, original)
    # swap payloads of an equal-key pair: stability violation
    eq = np.flatnonzero(good.keys[1:] == good.keys[:-1])
    i = int(eq[0])
    bad = good.copy()
    bad.payloads[[i, i + 1]] = bad.payloads[[i + 1, i]]
    assert not verify_against_input(bad, original)
    # perturb one key
    bad = good.copy()
    bad.keys[5] += 1
    assert not verify_against_input(bad, original)


def test_predicted_levels_known_values():
    cfg = SortConfig()
    assert predicted_levels(100, 32, cfg) == 0  # straight to the base case
    assert predicted_levels(10**5, 32, cfg) == 1
    assert predicted_levels(10**6, 32, cfg) == 1
    assert predicted_levels(10**7, 32, cfg) == 2  # 10**7 >> 8 stays above theta
    assert predicted_levels(10**7, 64, cfg) == 2
    assert predicted_levels(10**5, 32, cfg, skipped_bits=16) == 1
    deep = SortConfig(theory_mode=True, gamma_lo=4, gamma_hi=4)
    # theta = 2**8; masses 10**5, 6250, 390 stay above it, 24 does not
    assert predicted_levels(10**5, 32, deep) == 3


def test_csv_row_format():
    row = RunResult("dtsort", "zipf", 0.6, 10, 32, 2, 7, 1.25, True).csv_row()
    assert row == "dtsort,zipf,0.6,10,32,2,7,1.250,true,0,0,0"
    assert len(CSV_HEADER.split(",")) == len(row.split(","))
    row = RunResult("plain", "uniform", 10.0, 10, 64, 1, 0, 0.5, False).csv_row()
    assert row.split(",")[2] == "10" and row.split(",")[8] == "false"


def gen_file(tmp_path, name="data.bin", dist="uniform", param="1000", n="4000", seed="0"):
    path = tmp_path / name
    rc = main(["gen", "--dist", dist, "--param", param, "--n", n,
               "--seed", seed, "--out", str(path)])
    assert rc == 0
    return path


def test_cli_gen_and_sort_verify(tmp_path, capsys):
    path = gen_file(tmp_path)
    out = tmp_path / "sorted.bin"
    rc = main(["sort", "--in", str(path), "--algo", "dtsort", "--verify",
               "--instrument", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "verified=ok" in text and "moves=" in text
    rec, pw = read_dataset(out)
    assert pw == 8
    assert np.all(np.diff(rec.keys.astype(np.int64)) >= 0)


def test_cli_sort_missing_and_corrupt_files(tmp_path, capsys):
    assert main(["sort", "--in", str(tmp_path / "nope.bin")]) == 1
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNK")
    assert main(["sort", "--in", str(bad)]) == 1
    assert main(["verify", "--in", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_verify_accepts_real_output_only(tmp_path, capsys):
    path = gen_file(tmp_path, dist="zipf", param="1.0", n="3000")
    out = tmp_path / "sorted.bin"
    assert main(["sort", "--in", str(path), "--out", str(out)]) == 0
    for algo in ("baseline", "dtsort", "plain"):
        assert main(["verify", "--in", str(out), "--algo", algo]) == 0
    capsys.readouterr()

    rec, _ = read_dataset(out)
    # adjacent different keys swapped: order violation
    k = rec.keys.copy()
    step = np.flatnonzero(k[1:] > k[:-1])[0]
    k[[step, step + 1]] = k[[step + 1, step]]
    write_dataset(tmp_path / "disordered.bin", RecordArray(k, rec.payloads))
    assert main(["verify", "--in", str(tmp_path / "disordered.bin")]) == 1
    assert "nondecreasing" in capsys.readouterr().err

    # equal keys with payloads swapped: stability violation
    eq = np.flatnonzero(rec.keys[1:] == rec.keys[:-1])
    i = int(eq[0])
    p = rec.payloads.copy()
    p[[i, i + 1]] = p[[i + 1, i]]
    write_dataset(tmp_path / "unstable.bin", RecordArray(rec.keys, p))
    assert main(["verify", "--in", str(tmp_path / "unstable.bin")]) == 1
    assert "stable" in capsys.readouterr().err

    # payloads not a permutation
    p = rec.payloads.copy()
    p[0] = p[1]
    write_dataset(tmp_path / "duppay.bin", RecordArray(rec.keys, p))
    assert main(["verify", "--in", str(tmp_path / "duppay.bin")]) == 1
    assert "permutation" in capsys.readouterr().err


def test_cli_verify_keys_only(tmp_path, capsys):
    keys = np.sort(np.random.default_rng(3).integers(0, 99, 500).astype(np.uint32))
    write_dataset(tmp_path / "k.bin", RecordArray(keys))
    assert main(["verify", "--in", str(tmp_path / "k.bin")]) == 0
    assert "unchecked" in capsys.readouterr().out
    write_dataset(tmp_path / "k2.bin", RecordArray(keys[::-1].copy()))
    assert main(["verify", "--in", str(tmp_path / "k2.bin")]) == 1


def test_cli_bench_grid_csv(tmp_path, capsys):
    csv = tmp_path / "rows.csv"
    argv = ["bench", "--preset", "grid32", "--n", "2000", "--repeat", "2",
            "--seed", "1", "--csv", str(csv)]
    assert main(argv) == 0
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 20 * 3  # 4 families x 5 params x 3 algorithms
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[8] == "true"
        assert cells[3] == "2000" and cells[4] == "32"
    baseline_rows = [l for l in lines[1:] if l.startswith("baseline,")]
    assert all(r.split(",")[9:12] == ["0", "0", "0"] for r in baseline_rows)
    capsys.readouterr()

    # identical rows (minus wall time) on a second run
    csv2 = tmp_path / "rows2.csv"
    argv = ["bench", "--preset", "grid32", "--n", "2000", "--repeat", "2",
            "--seed", "1", "--csv", str(csv2)]
    assert main(argv) == 0
    capsys.readouterr()

    def strip_time(text):
        return [
            ",".join(c for i, c in enumerate(l.split(",")) if i != 7)
            for l in text.strip().split("\n")
        ]

    assert strip_time(csv.read_text()) == strip_time(csv2.read_text())


def test_cli_bench_grid64(tmp_path, capsys):
    csv = tmp_path / "rows64.csv"
    assert main(["bench", "--preset", "grid64", "--n", "1000", "--repeat", "1",
                 "--csv", str(csv)]) == 0
    capsys.readouterr()
    lines = csv.read_text().strip().split("\n")
    assert len(lines) == 61 and all(l.split(",")[4] == "64" for l in lines[1:])


def test_cli_threads_env(tmp_path, capsys, monkeypatch):
    path = gen_file(tmp_path)
    monkeypatch.setenv("ISRT_THREADS", "3")
    assert main(["sort", "--in", str(path)]) == 0
    assert "threads=3" in capsys.readouterr().out
    # explicit --threads wins over the environment
    assert main(["sort", "--in", str(path), "--threads", "2"]) == 0
    assert "threads=2" in capsys.readouterr().out


def test_cli_transpose_demo(capsys):
    rc = main(["transpose-demo", "--vertices", "50", "--edges", "5000",
               "--skew", "1.2", "--seed", "2", "--show", "3"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "stability check: ok" in text
    assert "in[0]" in text and "in[2]" in text


def test_cli_theory_check(capsys):
    rc = main(["theory-check", "--sizes", "2000", "100000", "--seed", "0"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "accounting bounds hold" in text


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
