import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hartree_iop import cli

FAST = ["--set", "grid.n=121"]


def run(argv, capsys):
    code = cli.main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_parse_config_text():
    cfg = cli.parse_config_text("# comment\ngrid.n = 101  # trailing\nrho_bar.preset = zero\n"
                                "solve.lambda_grid = [1, 2.5]\n")
    assert cfg == {"grid.n": 101, "rho_bar.preset": "zero", "solve.lambda_grid": [1, 2.5]}
    with pytest.raises(cli.ConfigParse):
        cli.parse_config_text("not a pair")


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("grid.n = 101\nsolve.lambda = 3\n")
    cfg = cli.load_config(path, ["grid.n=151"], seed=7)
    assert cfg["grid.n"] == 151 and cfg["solve.lambda"] == 3 and cfg["run.seed"] == 7
    with pytest.raises(cli.ConfigParse):
        cli.load_config(None, ["grid.bogus=1"])
    with pytest.raises(cli.ConfigParse):
        cli.load_config(None, ["tol.eig=0"])
    with pytest.raises(cli.ConfigParse):
        cli.load_config(tmp_path / "missing.cfg")


def test_eig_baseline(capsys, tmp_path):
    code, out = run(["eig", "--set", "grid.n=801", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert out["lambda1_rho_bar"] == pytest.approx(2.0, abs=5e-4)
    assert out["reverified"]["eigen_residual"]["match"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["provenance"]["seed"] == 0
    assert summary["provenance"]["version"] == cli.__version__
    assert "wall_time" not in summary
    with open(tmp_path / "fields.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "V", "u", "w_H"] and len(rows) == 802


def test_iop_below_threshold(capsys):
    code, out = run(["iop", *FAST, "--set", "solve.lambda=1.5"], capsys)
    assert code == cli.EXIT_INFEASIBLE
    assert out["category"] == "infeasible"
    l1 = out["lambda1_rho_bar"]
    assert repr(l1) in out["message"]


def test_config_errors(capsys):
    assert run(["iop", *FAST], capsys)[0] == cli.EXIT_CONFIG
    assert run(["iop", *FAST, "--set", "solve.lambda=3", "--set", "solve.kappa=1"],
               capsys)[0] == cli.EXIT_CONFIG
    code, out = run(["eig", "--set", "grid.mu=1.0"], capsys)
    assert code == cli.EXIT_CONFIG and out["category"] == "config"
    assert run(["eig", "--set", "rho_bar.preset=matrix"], capsys)[0] == cli.EXIT_CONFIG
    assert run(["eig", "--set", "grid.bogus=1"], capsys)[0] == cli.EXIT_CONFIG


def test_iop_dual_round_trip(capsys, tmp_path):
    code, iop = run(["iop", *FAST, "--set", "solve.lambda=1.0", "--set", "solve.relative=true",
                     "--set", "rho_bar.preset=gaussian_product", "--out", str(tmp_path)], capsys)
    assert code == 0 and all(v["match"] for v in iop["reverified"].values())
    header = (tmp_path / "rho_hat.txt").read_text().splitlines()[0]
    assert header == "# n=121 mu=0.5 L=12.0"
    code, dual = run(["dual", *FAST, "--set", f"solve.kappa={iop['phat']!r}",
                      "--set", "rho_bar.preset=gaussian_product"], capsys)
    assert code == 0
    assert dual["lambda_star"] == pytest.approx(iop["lambda"], abs=1e-6)


def test_ground(capsys):
    code, out = run(["ground", *FAST, "--set", "solve.lambda=3"], capsys)
    assert code == 0
    assert out["energy"] < 0 and out["sign_definite"]
    assert out["reverified"]["grad_norm"]["match"]


def test_branch_outputs(capsys, tmp_path):
    code, out = run(["branch", *FAST, "--set", "solve.lambda_grid=[0, 0.5, 1.0]",
                     "--set", "solve.relative=true", "--out", str(tmp_path)], capsys)
    assert code == 0 and out["failures"] == []
    with open(tmp_path / "branch.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["lambda", "u_norm_l2", "energy", "pde_residual"]
    norms = [float(r["u_norm_l2"]) for r in rows]
    assert norms[0] == 0.0 and norms[0] < norms[1] < norms[2]


def test_outputs_deterministic(capsys, tmp_path):
    argv = ["branch", *FAST, "--set", "solve.lambda_grid=[0.5, 1.0]", "--set",
            "solve.relative=true"]
    run(argv + ["--out", str(tmp_path / "a")], capsys)
    run(argv + ["--out", str(tmp_path / "b")], capsys)
    for name in ("summary.json", "branch.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_check_failure_exit(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_suite",
                        lambda *a, **k: {"fake": {"passed": False, "value": 1.0}})
    code, out = run(["check", *FAST], capsys)
    assert code == cli.EXIT_CHECK and out["status"] == "invariant_failure"


def test_solver_failure_exit(monkeypatch, capsys):
    from hartree_iop.errors import ScfStagnation

    def boom(*a, **k):
        raise ScfStagnation("plateau")
    monkeypatch.setattr(cli, "iop_solve", boom)
    code, out = run(["iop", *FAST, "--set", "solve.lambda=3"], capsys)
    assert code == cli.EXIT_SOLVER and out["category"] == "solver"


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("grid.n = 121\n")
    proc = subprocess.run([sys.executable, "-m", "hartree_iop.cli", "eig", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["config"]["grid.n"] == 121
