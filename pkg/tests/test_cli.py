import csv
from pathlib import Path

import numpy as np
import pytest

from bicopter_lqg.cli import CSV_COLUMNS, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def short_file(tmp_path, text, name="s.kv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_cli(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_validate_shipped_scenarios(capsys):
    for name in ("altitude_step", "circle", "figure8", "hover"):
        code, out, _ = run_cli(["validate", str(SCENARIO_DIR / f"{name}.kv")], capsys)
        assert code == EXIT_OK, out
        assert "FAIL" not in out


def test_validate_negative_mass(tmp_path, capsys):
    code, _, err = run_cli(["validate", short_file(tmp_path, "mass = -0.5\n")], capsys)
    assert code == EXIT_INVALID
    assert "mass" in err


def test_validate_indefinite_weight(tmp_path, capsys):
    f = short_file(tmp_path, "Q = diag(1 1 1 1 -1 1 1 1 1 1 1 1)\n")
    code, out, _ = run_cli(["validate", f], capsys)
    assert code == EXIT_INVALID
    assert "FAIL  controller synthesis" in out and "positive semidefinite" in out


def test_empty_scenario_list():
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code != 0


def test_run_writes_artifacts(tmp_path, capsys):
    f = short_file(tmp_path, "name = short\ntrajectory = circle\nmode = lqr\nduration = 0.5\n")
    code, out, _ = run_cli(["run", f, "--out", str(tmp_path / "out")], capsys)
    assert code == EXIT_OK
    d = tmp_path / "out" / "short"
    with open(d / "timeseries.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 52
    assert float(rows[1][CSV_COLUMNS.index("x")]) == pytest.approx(-1.3)
    kv = dict(line.split(" = ", 1) for line in (d / "summary.kv").read_text().splitlines())
    assert kv["status"] == "ok" and float(kv["rmse_full_x"]) >= 0
    assert "RMSE" in (d / "summary.txt").read_text()


def test_outputs_are_bit_identical(tmp_path, capsys):
    f = short_file(tmp_path, "name = n\ntrajectory = figure8\nnoise = on\nduration = 0.5\n")
    for sub in ("a", "b"):
        assert run_cli(["run", f, "--out", str(tmp_path / sub), "--seed", "3"], capsys)[0] == EXIT_OK
    a = (tmp_path / "a" / "n" / "timeseries.csv").read_bytes()
    assert a == (tmp_path / "b" / "n" / "timeseries.csv").read_bytes()


def test_compare_writes_a_paired_table(tmp_path, capsys):
    f = short_file(tmp_path, "name = c\ntrajectory = circle\nnoise = on\npayload = table\nduration = 1\n")
    code, out, _ = run_cli(["run", f, "--compare", "--seeds", "2", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    text = (tmp_path / "c_comparison.txt").read_text()
    assert "seed 0" in text and "seed 1" in text
    assert (tmp_path / "c_lqr_seed1" / "timeseries.csv").exists()


def test_q_sweep_table(tmp_path, capsys):
    f = short_file(tmp_path, "name = step\nmode = lqr\nduration = 10\n")
    code, out, _ = run_cli(["run", f, "--q-sweep", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    table = (tmp_path / "step_q_sweep.txt").read_text()
    for row in ("RiseTime", "SettlingTime", "SettlingMin", "SettlingMax", "Overshoot", "RMSE"):
        assert row in table
    assert "700*CtC" in table


def test_gains_report(tmp_path, capsys):
    code, out, _ = run_cli(["gains", str(SCENARIO_DIR / "circle.kv"), "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert "controllability rank 12/12" in out and "observability rank 12/12" in out
    for label in ("A - B K", "A - L C"):
        block = out.split(f"eig({label}), sorted by real part:\n")[1].splitlines()[:12]
        re = [float(line.split()[0]) for line in block]
        assert all(r < 0 for r in re) and re == sorted(re)
    assert np.loadtxt(tmp_path / "K.txt").shape == (4, 12)
    assert (tmp_path / "A.txt").exists()


def test_gains_synthesis_failure(tmp_path, capsys):
    f = short_file(tmp_path, "noise_input = identity\n")
    code, _, err = run_cli(["gains", f], capsys)
    assert code == EXIT_RUNTIME
    assert "synthesis failed" in err


def test_run_reports_synthesis_failure(tmp_path, capsys):
    f = short_file(tmp_path, "R = diag(1 1 1 0)\nduration = 1\n")
    code, out, _ = run_cli(["run", f, "--out", str(tmp_path)], capsys)
    assert code == EXIT_RUNTIME
    assert "synthesis_failed" in out


def test_printed_b_sign_override(capsys):
    code, out, _ = run_cli(["gains", str(SCENARIO_DIR / "altitude_step.kv"), "--b-sign", "printed"], capsys)
    assert code == EXIT_OK
