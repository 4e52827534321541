import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from moran_dim.cli import main
from moran_dim.csvio import read_csv
from moran_dim.specfile import load


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_theta_constant_column(cantor_file, capsys):
    code, out, _ = run(["theta", "--spec", cantor_file, "--m-max", 5], capsys)
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["n", "m", "theta", "residual"] and len(rows) == 5
    assert all(abs(float(r[2]) - 0.6309297536) < 1e-10 for r in rows)


def test_provenance_line(cantor_file, capsys):
    _, out, _ = run(["theta", "--spec", cantor_file, "--seed", 7], capsys)
    digest = hashlib.sha256(cantor_file.read_bytes()).hexdigest()
    assert out.splitlines()[0] == f"#spec-hash={digest} #version=0.1.0 #seed=7"


def test_twelve_significant_digits(cantor_file, capsys):
    _, out, _ = run(["theta", "--spec", cantor_file, "--m-max", 1], capsys)
    assert read_csv(out)[1][0][2] == "0.630929753572"


def test_check_reports_overlap(tmp_path, capsys):
    bad = tmp_path / "bad_overlap.json"
    bad.write_text(json.dumps({
        "dimension": 1, "ambient": {"box": {"lo": [0.0], "hi": [1.0]}},
        "tail": {"periodic": [[{"ratio": 0.5, "translation": 0.0}, {"ratio": 0.5, "translation": 0.25}]]}}))
    code, out, _ = run(["check", "--spec", bad], capsys)
    assert code == 0
    table = dict(read_csv(out)[1])
    assert table["osc"] == "fail"
    assert json.loads(table["osc_witness"])["overlap"] == [0.25, 0.5]
    assert table["bnc"] == "unknown"


def test_check_cantor(cantor_file, capsys):
    code, out, _ = run(["check", "--spec", cantor_file], capsys)
    table = dict(read_csv(out)[1])
    assert code == 0 and table["osc"] == "pass" and table["bnc"] == "verified"
    assert "c=12" in table["bnc_clauses"]


def test_render_writes_points(cantor_file, tmp_path, capsys):
    out_path = tmp_path / "pts.csv"
    code, out, _ = run(["render", "--spec", cantor_file, "--depth", 6, "--out", out_path], capsys)
    assert code == 0 and out == ""
    header, rows = read_csv(out_path.read_text())
    assert header == ["x", "err"]
    x = np.array([float(r[0]) for r in rows])
    assert x.size == 64 and x.min() >= 0 and x.max() <= 1
    assert np.diff(x).min() >= 3.0 ** -6
    # the temporary file was renamed into place
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cantor.json", "pts.csv"]


def test_dima_summary(cantor_file, capsys):
    code, out, _ = run(["dima", "--spec", cantor_file, "--m-max", 3], capsys)
    assert code == 0
    assert "#estimate=0.630929753572 #bnc=verified" in out


def test_nbhd_estimate_pack(cantor_file, capsys):
    code, out, _ = run(["nbhd", "--spec", cantor_file, "--r", "0.25,0.1"], capsys)
    assert code == 0 and [r[1:3] for r in read_csv(out)[1]] == [["2", "2"], ["2", "2"]]
    code, out, _ = run(["estimate", "--spec", cantor_file, "--delta-min", 1e-3], capsys)
    assert code == 0 and read_csv(out)[0] == ["r", "delta", "psi_lo", "psi_hi", "Psi_lo", "Psi_hi"]
    assert "#interval=[" in out and "#caveat=" in out
    code, out, _ = run(["pack", "--spec", cantor_file, "--alpha", "0.64", "--depths", "1:3"], capsys)
    assert code == 0
    rows = read_csv(out)[1]
    assert [r[1] for r in rows] == ["1", "2", "3"] and [r[3] for r in rows] == ["2", "4", "8"]


def test_example_writes_loadable_spec(tmp_path, capsys):
    path = tmp_path / "ex.json"
    code, _, _ = run(["example", "--name", "arbitrary", "--param", "s=0.5", "--param", "t=1.0",
                      "--out", path], capsys)
    assert code == 0
    spec = load(path)
    assert len(spec.level(8)) == 8
    code, out, _ = run(["theta", "--spec", path, "--m-max", 2, "--n-max", 3], capsys)
    assert code == 0 and all(abs(float(r[2]) - 0.5) < 1e-9 for r in read_csv(out)[1])


def test_invalid_spec_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimension": 1, "ambient": {"box": {"lo": [0], "hi": [1]}},
                               "tail": {"periodic": [[{"ratio": 0.5, "translation": 0.75},
                                                      {"ratio": 0.5, "translation": 0.0}]]}}))
    code, out, err = run(["theta", "--spec", bad], capsys)
    assert code == 2 and out == "" and "leaves X" in err
    code, _, err = run(["theta", "--spec", tmp_path / "missing.json"], capsys)
    assert code == 2
    (tmp_path / "junk.json").write_text("{")
    assert run(["check", "--spec", tmp_path / "junk.json"], capsys)[0] == 2


def test_bad_tolerance_exit_2(cantor_file, capsys):
    code, _, err = run(["theta", "--spec", cantor_file, "--tol", 0], capsys)
    assert code == 2 and "--tol" in err


def test_budget_exit_3(cantor_file, capsys):
    code, out, err = run(["render", "--spec", cantor_file, "--depth", 40], capsys)
    assert code == 3 and "budget" in err and out == ""


def test_threads_env_does_not_change_output(cantor_file, capsys, monkeypatch):
    argv = ["estimate", "--spec", cantor_file, "--delta-min", 1e-3]
    _, one, _ = run(argv, capsys)
    monkeypatch.setenv("MORAN_DIM_THREADS", "4")
    _, four, _ = run(argv, capsys)
    assert one == four


def test_console_script_exit_code(cantor_file):
    res = subprocess.run([sys.executable, "-m", "moran_dim.cli", "render", "--spec", str(cantor_file),
                          "--depth", "1"], capture_output=True, text=True)
    assert res.returncode == 0
    rows = read_csv(res.stdout)[1]
    assert [float(r[0]) for r in rows] == pytest.approx([0.0, 2 / 3])
    assert [float(r[1]) for r in rows] == pytest.approx([1 / 3, 1 / 3])
