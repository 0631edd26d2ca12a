from __future__ import annotations

import json

import numpy as np
import pytest

from hosnet.cli import DEFAULT_SEED, SCHEMA_VERSION, main


def read_csv_rows(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_points_vdc(tmp_path, capsys):
    assert main(["points", "--construction", "vdc", "--b", "2", "--m", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == f"# schema_version: {SCHEMA_VERSION}"
    assert [l for l in out if not l.startswith("#")] == ["x1", "0.0", "0.5", "0.25", "0.75"]


def test_points_interlaced_shape(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["points", "--construction", "sobol", "--s", "4", "--m", "3", "--interlace", "2", "--out", str(out)]) == 0
    rows = read_csv_rows(out)
    assert rows[0] == "x1,x2" and len(rows) == 9


@pytest.mark.parametrize("scramble", ["owen", "linear"])
def test_points_deterministic(tmp_path, scramble):
    args = ["points", "--s", "2", "--m", "5", "--scramble", scramble, "--seed", "9", "--format", "json"]
    a = tmp_path / "a.json"
    assert main(args + ["--out", str(a)]) == 0
    first = a.read_bytes()
    assert main(args + ["--out", str(a)]) == 0
    assert a.read_bytes() == first
    doc = json.loads(a.read_text())
    assert doc["config"]["seed"] == 9 and doc["schema_version"] == SCHEMA_VERSION
    assert len(doc["points"]) == 32


def test_points_bad_config(capsys):
    assert main(["points", "--b", "4"]) == 2
    assert "prime" in capsys.readouterr().err
    assert main(["points", "--s", "3", "--interlace", "2"]) == 2


def test_verify(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--construction", "vdc", "--m", "4", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["t"] == 0 and rep["passed"]

    assert main(["verify", "--construction", "sobol", "--s", "6", "--m", "8", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["fails_at_t_minus_1"]


def test_verify_zero_matrices(tmp_path):
    mats = tmp_path / "z.json"
    mats.write_text(json.dumps(np.zeros((2, 3, 3), dtype=int).tolist()))
    out = tmp_path / "v.json"
    assert main(["verify", "--matrices", str(mats), "--m", "3", "--s", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["t"] == 3


def test_verify_guard(capsys):
    assert main(["verify", "--construction", "sobol", "--s", "30", "--m", "20"]) == 2
    assert "too large" in capsys.readouterr().err


def test_converge_none(tmp_path):
    out = tmp_path / "c.csv"
    args = ["converge", "--integrand", "example1", "--m-min", "4", "--m-max", "6", "--reps", "3", "--scramble", "none", "--out", str(out)]
    assert main(args) == 0
    rows = read_csv_rows(out)
    assert rows[0] == "d,m,N,rmse,stderr,replications,scramble,seed,integrand"
    assert rows[1].endswith(f"none,{DEFAULT_SEED},example1")
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["config"]["m_range"] == [4, 5, 6] and summary["slope_defined"]


def test_converge_threads_identical(tmp_path):
    base = ["converge", "--d", "2", "--m-min", "4", "--m-max", "7", "--reps", "10"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--threads", "3", "--out", str(b)]) == 0
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# config")]
    assert strip(a) == strip(b)


def test_converge_expect_slope(tmp_path):
    args = ["converge", "--m-min", "6", "--m-max", "9", "--reps", "30", "--scramble", "mc", "--expect-slope", "-2.0", "--out", str(tmp_path / "c.csv")]
    assert main(args) == 1


def test_theory_owen_check(tmp_path):
    out = tmp_path / "o.json"
    assert main(["theory", "owen-check", "--cases", "12", "--trials", "2000", "--min-pass", "11", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["n_cases"] == 12 and rep["schema_version"] == SCHEMA_VERSION


def test_theory_gain(tmp_path):
    out = tmp_path / "g.json"
    assert main(["theory", "gain", "--construction", "faure", "--b", "3", "--s", "2", "--d", "2", "--m", "3", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert all(c["gamma"] == "0" for c in rep["cases"] if c["band"] == "zero")
    assert main(["theory", "gain", "--s", "2", "--d", "2", "--m", "3", "--ell", "2,2", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["cases"]) == 1


def test_theory_vardecomp_const(tmp_path):
    out = tmp_path / "v.json"
    assert main(["theory", "vardecomp", "--integrand", "const", "--m", "4", "--reps", "50", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["empirical_variance"] == 0.0 and rep["predicted_variance"] == pytest.approx(0.0, abs=1e-28)
