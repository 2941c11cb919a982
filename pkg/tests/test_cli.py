import numpy as np

from curvbandit.cli import main
from curvbandit.harness import RegretCurve, read_summary


def test_run_writes_curves_and_summary(tmp_path, capsys):
    code = main(["run", "--strategy", "sparse-mab", "--env", "sparse", "--n", "10", "--T", "2000",
                 "--s", "2", "--seeds", "4", "--out", str(tmp_path)])
    assert code == 0
    assert len(list(tmp_path.glob("curve_seed*.csv"))) == 4
    summary = read_summary(tmp_path / "summary.txt")
    assert summary["verdict.sparse_bound"] == "PASS"
    assert "mean_regret=" in capsys.readouterr().out
    curve = RegretCurve.from_csv(tmp_path / "curve_seed0.csv")
    assert curve.config_hash == summary["config_hash"]


def test_sweep_reports_slope(tmp_path, capsys):
    code = main(["sweep", "--strategy", "sparse-mab", "--env", "sparse", "--n", "8", "--T", "500",
                 "--style", "random-support", "--seeds", "2", "--vary", "s=1,2,4", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "slope=" in out
    assert (tmp_path / "s=4" / "curve_seed1.csv").exists()


def test_verify_lemmas_subset(capsys):
    assert main(["verify-lemmas", "--suite", "simplex-kkt", "--suite", "lp-unbiased"]) == 0
    assert "2/2 suites passed" in capsys.readouterr().out


def test_starved_run(tmp_path, capsys):
    code = main(["starved-run", "--strategy", "lp-ball", "--env", "ball-noisy", "--n", "3", "--T", "300",
                 "--p", "1.5", "--seeds", "2", "--out", str(tmp_path)])
    assert code == 0
    assert float(read_summary(tmp_path / "summary.txt")["mean_explorations"]) > 0


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CURVBANDIT_OUT", str(tmp_path / "env-out"))
    assert main(["run", "--strategy", "lp-ball", "--env", "ball-noisy", "--n", "2", "--T", "100", "--seeds", "1"]) == 0
    assert (tmp_path / "env-out" / "summary.txt").exists()


def test_debug_audit_flag(tmp_path):
    assert main(["run", "--strategy", "sparse-mab", "--env", "sparse", "--n", "4", "--T", "300", "--seeds", "2",
                 "--debug-audit", "--out", str(tmp_path)]) == 0
    slack = float(read_summary(tmp_path / "summary.txt")["min_audit_slack"])
    assert np.isfinite(slack) and slack >= -1e-6


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    code = main(["run", "--strategy", "sparse-mab", "--env", "sparse", "--n", "4", "--T", "100",
                 "--s", "9", "--out", str(tmp_path)])
    assert code != 0
    assert "error" in capsys.readouterr().err
    assert main(["sweep", "--strategy", "sparse-mab", "--env", "sparse", "--n", "4", "--T", "100",
                 "--vary", "s", "--out", str(tmp_path)]) == 2
