import csv
import json
import math

import numpy as np
import pytest

from lorenzmix.cli import build_parser, dispatch


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_no_arguments(capsys):
    assert dispatch([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert dispatch(["obstruct", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand():
    assert dispatch(["frobnicate"]) == 2


def test_precondition_exit(tmp_path):
    assert dispatch(["obstruct", "--a", "1", "--n", "5000", "--out-dir", str(tmp_path), "--quiet"]) == 2


def test_all_subcommands_registered():
    p = build_parser()
    names = set(next(a for a in p._actions if a.dest == "command").choices)
    assert names == {"simulate", "section", "passage", "check-map", "check-leo", "induce", "ulam", "suspend",
                     "correlate", "cohomology", "obstruct", "spectrum", "cone-check", "extract-map"}


def test_obstruct_ten_rows(tmp_path):
    assert dispatch(["obstruct", "--a", "1.0", "--n", "10", "--out-dir", str(tmp_path), "--quiet"]) == 0
    table = rows(tmp_path / "obstruct.csv")
    assert len(table) == 10
    assert list(table[0]) == ["n", "b_n", "x_n", "neg_log_x_n", "phase_error"]
    b = np.array([float(r["b_n"]) for r in table])
    n = np.array([int(r["n"]) for r in table])
    assert np.allclose(np.exp(1j * b), (-1.0) ** n, atol=1e-9)
    man = json.loads((tmp_path / "obstruct.json").read_text())
    assert man["metrics"]["alternating_sign"] is True
    assert man["seed"] == 0 and man["status"] == "ok"
    assert man["outputs"] == [str(tmp_path / "obstruct.csv")]


def test_check_leo_reports_k(tmp_path, capsys):
    assert dispatch(["check-leo", "--u", "0.4,0.41", "--out-dir", str(tmp_path)]) == 0
    err = capsys.readouterr().err
    assert "k: " in err and "covered_interval" in err
    m = json.loads((tmp_path / "check-leo.json").read_text())["metrics"]
    assert m["success"] and 1 <= m["k"] <= 30
    lo, hi = m["covered_interval"]
    assert lo <= 0 and hi >= 1


def test_inconclusive_leo_exits_3(tmp_path):
    assert dispatch(["check-leo", "--u", "0.4,0.41", "--k-max", "1", "--out-dir", str(tmp_path), "--quiet"]) == 3
    man = json.loads((tmp_path / "check-leo.json").read_text())
    assert man["status"] == "ConvergenceError"
    assert (tmp_path / "check-leo.csv").exists()


def test_numerical_error_exits_3(tmp_path):
    # an orbit starting on the stable axis of the origin never reaches the section
    code = dispatch(["section", "--x0", "0,0,20", "--burn-in", "0", "--n", "1", "--time-cap", "5",
                     "--out-dir", str(tmp_path), "--quiet"])
    assert code == 3


def test_stdout_output(tmp_path, capsys):
    assert dispatch(["obstruct", "--n", "3", "--output", "-", "--out-dir", str(tmp_path), "--quiet"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n,b_n,x_n,neg_log_x_n,phase_error" and len(out) == 4


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[common]\nseed = 5\n\n[obstruct]\nn = 7\na = 2.0\n")
    assert dispatch(["obstruct", "--config", str(cfg), "--out-dir", str(tmp_path / "a"), "--quiet"]) == 0
    man = json.loads((tmp_path / "a" / "obstruct.json").read_text())
    assert man["config"]["n"] == 7 and man["config"]["a"] == 2.0 and man["seed"] == 5
    assert dispatch(["obstruct", "--config", str(cfg), "--n", "4", "--out-dir", str(tmp_path / "b"),
                     "--quiet"]) == 0
    assert len(rows(tmp_path / "b" / "obstruct.csv")) == 4


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[obstruct]\nwidth = 3\n")
    assert dispatch(["obstruct", "--config", str(cfg), "--quiet"]) == 2


def test_missing_config(tmp_path):
    assert dispatch(["obstruct", "--config", str(tmp_path / "none.ini"), "--quiet"]) == 2


@pytest.mark.parametrize("argv", [
    ["ulam", "--bins", "256"],
    ["correlate", "--ensemble", "2000", "--t-max", "5", "--bins", "256", "--seed", "3"],
    ["passage", "--n", "50", "--verify", "5", "--seed", "9"],
])
def test_manifest_reproduces(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert dispatch(argv + ["--out-dir", str(a), "--quiet"]) == 0
    cmd = argv[0]
    assert dispatch([cmd, "--config", str(a / f"{cmd}.json"), "--out-dir", str(b), "--quiet"]) == 0
    ma = json.loads((a / f"{cmd}.json").read_text())
    mb = json.loads((b / f"{cmd}.json").read_text())
    assert ma["metrics"] == mb["metrics"]
    assert (a / f"{cmd}.csv").read_text() == (b / f"{cmd}.csv").read_text()


def test_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LORENZMIX_OUT_DIR", str(tmp_path))
    assert dispatch(["check-map", "--grid", "1000", "--quiet"]) == 0
    m = json.loads((tmp_path / "check-map.json").read_text())["metrics"]
    assert m["min_derivative"] == pytest.approx(1.4625)
    assert m["sqrt2_sufficiency"] is True


def test_threads_recorded(tmp_path):
    assert dispatch(["obstruct", "--n", "2", "--threads", "1", "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert json.loads((tmp_path / "obstruct.json").read_text())["threads"] == 1


def test_cohomology_pi(tmp_path):
    assert dispatch(["cohomology", "--a", "0,pi", "--bins", "256", "--out-dir", str(tmp_path), "--quiet"]) == 0
    t = rows(tmp_path / "cohomology.csv")
    assert float(t[1]["a"]) == math.pi
    assert float(t[0]["residual"]) < 1e-12


def test_spectrum_from_suspend(tmp_path):
    assert dispatch(["suspend", "--n", "4096", "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert dispatch(["spectrum", "--input", str(tmp_path / "suspend.csv"), "--out-dir", str(tmp_path),
                     "--quiet"]) == 0
    m = json.loads((tmp_path / "spectrum.json").read_text())["metrics"]
    assert m["length"] == 4096 and m["dt"] == 0.5
    assert m["max_fraction"] < 0.2


def test_extract_map_synthetic(tmp_path):
    assert dispatch(["extract-map", "--synthetic", "--events", "20000", "--out-dir", str(tmp_path),
                     "--quiet"]) == 0
    for name in ("extract-map.csv", "extract-map_roof.csv", "extract-map_fit.json", "extract-map.json"):
        assert (tmp_path / name).exists()


def test_simulate_and_section(tmp_path):
    assert dispatch(["simulate", "--duration", "2", "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert list(rows(tmp_path / "simulate.csv")[0]) == ["t", "x", "y", "z"]
    assert dispatch(["section", "--n", "20", "--burn-in", "10", "--out-dir", str(tmp_path), "--quiet"]) == 0
    t = rows(tmp_path / "section.csv")
    assert len(t) == 20 and all(float(r["z"]) == 27.0 for r in t)


def test_induce_and_cone_check(tmp_path):
    assert dispatch(["induce", "--depth", "12", "--threshold", "0.5", "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert list(rows(tmp_path / "induce.csv")[0]) == ["omega_left", "omega_right", "R"]
    assert dispatch(["cone-check", "--samples", "50", "--axis-burn", "20", "--out-dir", str(tmp_path),
                     "--quiet"]) == 0
    m = json.loads((tmp_path / "cone-check.json").read_text())["metrics"]
    assert m["violations"] == 0
