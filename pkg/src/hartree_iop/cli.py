"""Command line front end: ``hartree-iop {eig,ground,iop,dual,branch,check}``.

Configuration is a flat text file of ``section.key = value`` lines (``#``
starts a comment) merged over built-in defaults, then ``--set`` overrides.
Values are parsed as JSON where possible and kept as strings otherwise.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import run_suite
from .errors import ConfigError, ConfigParse, GridMismatch, HartreeIopError
from .grid import GridSpec, build_grid, build_potential
from .iop import DualOptions, ScfOptions, branch_sweep, dual_solve, iop_solve
from .operators import HartreeProblem, Kernel, assemble_operator, lmu_dist2
from .spectral import eigenpair, lowest_eigenvalues
from .variational import DescentOptions, ground_state, hessian_min_eig

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4, 5

DEFAULTS = {
    "grid.dimension": 1,
    "grid.half_width": 12.0,
    "grid.n": 401,
    "grid.mu": 0.5,
    "potential.preset": "harmonic_plus",
    "potential.c": 1.0,
    "potential.file": None,
    "rho_bar.preset": "zero",
    "rho_bar.c": 0.5,
    "rho_bar.s": 1.0,
    "rho_bar.file": None,
    "model.gamma": 1.0,
    "solve.lambda": None,
    "solve.kappa": None,
    "solve.lambda_grid": None,
    "solve.relative": False,
    "tol.eig": 1e-11,
    "tol.scf_residual": 1e-8,
    "tol.scf_change": 1e-10,
    "tol.descent": 1e-8,
    "tol.dual": 1e-8,
    "check.directions": 10,
    "check.chords": 10,
    "run.seed": 0,
}

SOLVE_TARGET = {"ground": "solve.lambda", "iop": "solve.lambda", "dual": "solve.kappa",
                "branch": "solve.lambda_grid"}


def parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or "." not in key:
            raise ConfigParse(f"{source}:{lineno}: expected 'section.key = value', got {raw!r}")
        out[key] = parse_value(value)
    return out


def load_config(path=None, overrides=(), seed=None):
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigParse(f"cannot read config {path}: {exc}") from exc
        cfg.update(parse_config_text(text, str(path)))
    for item in overrides:
        cfg.update(parse_config_text(item, "--set"))
    if seed is not None:
        cfg["run.seed"] = seed
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigParse(f"unknown configuration keys: {', '.join(unknown)}")
    for key in [k for k in cfg if k.startswith("tol.")]:
        if not (isinstance(cfg[key], (int, float)) and cfg[key] > 0):
            raise ConfigParse(f"{key} must be a positive number, got {cfg[key]!r}")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _lambda_grid(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        value = [v for v in value.replace(";", ",").split(",") if v.strip()]
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"solve.lambda_grid must be a list of numbers, got {value!r}") from exc


def build_problem(cfg, strict=False):
    try:
        spec = GridSpec(int(cfg["grid.dimension"]), float(cfg["grid.half_width"]),
                        int(cfg["grid.n"]), float(cfg["grid.mu"]))
        gamma = float(cfg["model.gamma"])
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"bad numeric configuration value: {exc}") from exc
    grid = build_grid(spec)
    pot = build_potential(grid, cfg["potential.preset"], c=float(cfg["potential.c"]),
                          file=cfg["potential.file"], strict=strict)
    preset = cfg["rho_bar.preset"]
    if preset == "zero":
        rho = Kernel.zeros(grid)
    elif preset == "gaussian_product":
        rho = Kernel.gaussian_product(grid, float(cfg["rho_bar.c"]), float(cfg["rho_bar.s"]))
    elif preset in ("rank_k", "matrix"):
        if not cfg["rho_bar.file"]:
            raise ConfigParse(f"rho_bar.preset = {preset} needs rho_bar.file")
        data = np.loadtxt(cfg["rho_bar.file"], ndmin=2)
        rho = Kernel.from_factors(grid, data) if preset == "rank_k" else Kernel(grid, data)
    else:
        raise ConfigParse(f"unknown rho_bar.preset {preset!r}")
    return HartreeProblem(pot, gamma=gamma), rho


def _require_target(cfg, command):
    present = [k for k in ("solve.lambda", "solve.kappa", "solve.lambda_grid")
               if cfg[k] is not None]
    want = SOLVE_TARGET[command]
    if present != [want]:
        raise ConfigParse(f"'{command}' needs exactly {want} among the solve targets; "
                          f"got {present or 'none'}")
    return cfg[want]


def _scf_options(cfg):
    return ScfOptions(residual_tol=cfg["tol.scf_residual"], change_tol=cfg["tol.scf_change"],
                      eig_tol=cfg["tol.eig"])


def _target_lambda(cfg, value, l1):
    return float(value) + (l1 if cfg["solve.relative"] else 0.0)


def independent_pde_residual(problem, lam, rho_bar, u):
    """Residual re-evaluated from a freshly assembled operator and an explicit convolution."""
    g = problem.grid
    op = assemble_operator(rho_bar, problem.potential).matrix
    w_h = g.weight * np.einsum("ij,j->i", g.riesz.weights, u * u)
    r = op @ u + problem.gamma * w_h * u - lam * u
    return float(np.sqrt(g.weight * np.einsum("i,i->", r, r)))


def _reverify(name, reported, recomputed, summary):
    ok = abs(reported - recomputed) <= 1e-12 * max(1.0, abs(reported))
    summary.setdefault("reverified", {})[name] = {"reported": reported,
                                                  "recomputed": recomputed, "match": ok}
    if not ok:
        summary["status"] = "reverification_failed"


def write_fields(path, problem, u, w_h):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        cols = ["x", "y"][: problem.grid.dimension]
        wr.writerow(cols + ["V", "u", "w_H"])
        for p, v, ui, wi in zip(problem.grid.points, problem.potential.values, u, w_h):
            wr.writerow([repr(float(c)) for c in p] + [repr(float(v)), repr(float(ui)),
                                                         repr(float(wi))])


def cmd_eig(cfg, problem, rho_bar, out):
    op = problem.operator(rho_bar)
    pair = eigenpair(problem, rho_bar, tol=cfg["tol.eig"])
    lam2 = float(lowest_eigenvalues(op, 2)[1]) if problem.grid.size > 1 else None
    summary = {"lambda1_rho_bar": pair.lambda1, "eigen_residual": pair.residual,
               "lambda2": lam2, "iterations": pair.iterations, "method": pair.method}
    x = pair.phi1 * np.sqrt(problem.grid.weight)
    recomputed = float(np.linalg.norm(op.matrix @ x - (x @ op.matrix @ x) * x))
    _reverify("eigen_residual", pair.residual, recomputed, summary)
    if out:
        write_fields(out / "fields.csv", problem, pair.phi1, np.zeros(problem.grid.size))
    return summary


def cmd_ground(cfg, problem, rho_bar, out):
    value = _require_target(cfg, "ground")
    pair = eigenpair(problem, rho_bar, tol=cfg["tol.eig"])
    lam = _target_lambda(cfg, value, pair.lambda1)
    gs = ground_state(problem, lam, rho_bar, DescentOptions(tol=cfg["tol.descent"]), pair=pair)
    g = problem.grid
    summary = {"lambda1_rho_bar": pair.lambda1, "lambda": lam, "energy": gs.energy,
               "grad_norm": gs.grad_norm, "iterations": gs.iterations,
               "sign_definite": gs.sign_definite, "u_norm_l2": g.l2_norm(gs.u),
               "hessian_min_eig": hessian_min_eig(problem, lam, rho_bar, gs.u)}
    _reverify("grad_norm", gs.grad_norm,
              independent_pde_residual(problem, lam, rho_bar, gs.u), summary)
    if out:
        from .operators import hartree_potential
        write_fields(out / "fields.csv", problem, gs.u, hartree_potential(g, gs.u))
    return summary


def _iop_summary(problem, rho_bar, sol, summary):
    g = problem.grid
    summary.update({"lambda": sol.lam, "phat": sol.phat, "varpi": sol.varpi,
                    "lambda_check": sol.lambda_check, "pde_residual": sol.pde_residual,
                    "reconstruction_defect": sol.reconstruction_defect,
                    "principal_defect": sol.principal_defect, "iterations": sol.iterations,
                    "u_norm_l2": g.l2_norm(sol.u_hat)})
    if np.any(sol.u_hat):
        _reverify("pde_residual", sol.pde_residual,
                  independent_pde_residual(problem, sol.lam, rho_bar, sol.u_hat), summary)
    rank_one = problem.gamma * np.einsum("i,j->ij", sol.u_hat, sol.u_hat)
    _reverify("reconstruction_defect", sol.reconstruction_defect,
              float(np.max(np.abs(sol.rho_hat.values - rho_bar.values + rank_one))), summary)


def cmd_iop(cfg, problem, rho_bar, out):
    value = _require_target(cfg, "iop")
    pair = eigenpair(problem, rho_bar, tol=cfg["tol.eig"])
    lam = _target_lambda(cfg, value, pair.lambda1)
    sol = iop_solve(problem, lam, rho_bar, _scf_options(cfg), pair=pair)
    summary = {"lambda1_rho_bar": pair.lambda1}
    _iop_summary(problem, rho_bar, sol, summary)
    if out:
        from .operators import hartree_potential
        write_fields(out / "fields.csv", problem, sol.u_hat,
                     hartree_potential(problem.grid, sol.u_hat))
        sol.rho_hat.save(out / "rho_hat.txt")
    return summary


def cmd_dual(cfg, problem, rho_bar, out):
    kappa = float(_require_target(cfg, "dual"))
    scf = ScfOptions(residual_tol=min(cfg["tol.scf_residual"], 1e-11),
                     change_tol=min(cfg["tol.scf_change"], 1e-12), eig_tol=cfg["tol.eig"])
    sol = dual_solve(problem, kappa, rho_bar, DualOptions(tol=cfg["tol.dual"], scf=scf))
    summary = {"lambda1_rho_bar": sol.lambda1_bar, "kappa": kappa,
               "lambda_star": sol.lambda_star, "lambda_check": sol.lambda_check,
               "constraint_defect": sol.constraint_defect, "evaluations": sol.evaluations}
    g = problem.grid
    diff = rho_bar.values - sol.rho_check.values
    dist2 = float(g.weight**2 * np.einsum("ij,ij,ij->", diff, diff, g.riesz.weights))
    _reverify("constraint_defect", sol.constraint_defect, abs(dist2 - kappa), summary)
    if out:
        sol.rho_check.save(out / "rho_check.txt")
    return summary


def cmd_branch(cfg, problem, rho_bar, out):
    values = _lambda_grid(_require_target(cfg, "branch"))
    pair = eigenpair(problem, rho_bar, tol=cfg["tol.eig"])
    lams = sorted(_target_lambda(cfg, v, pair.lambda1) for v in values)
    points = branch_sweep(problem, rho_bar, lams, _scf_options(cfg))
    summary = {"lambda1_rho_bar": pair.lambda1, "points": len(points),
               "failures": [p.lam for p in points if p.error]}
    if out:
        with open(out / "branch.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["lambda", "u_norm_l2", "energy", "pde_residual"])
            for p in points:
                wr.writerow([repr(p.lam), repr(p.u_norm_l2), repr(p.energy),
                             repr(p.pde_residual)])
    summary["branch"] = [{"lambda": p.lam, "u_norm_l2": p.u_norm_l2, "energy": p.energy,
                          "pde_residual": p.pde_residual, "error": p.error} for p in points]
    return summary


def cmd_check(cfg, problem, rho_bar, out):
    report = run_suite(problem, rho_bar, seed=int(cfg["run.seed"]),
                       directions=int(cfg["check.directions"]), chords=int(cfg["check.chords"]))
    summary = {"suites": report, "all_passed": all(r["passed"] for r in report.values())}
    if not summary["all_passed"]:
        summary["status"] = "invariant_failure"
    return summary


COMMANDS = {"eig": cmd_eig, "ground": cmd_ground, "iop": cmd_iop, "dual": cmd_dual,
            "branch": cmd_branch, "check": cmd_check}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def run(command, cfg, out=None, strict=False):
    """Execute one subcommand; returns ``(exit_code, summary)`` and never raises
    library errors."""
    summary = {"command": command, "status": "ok", "config": cfg,
               "provenance": {"config_hash": config_hash(cfg), "seed": cfg["run.seed"],
                              "tolerances": {k: v for k, v in cfg.items()
                                             if k.startswith("tol.")},
                              "version": __version__}}
    code = EXIT_OK
    t0 = time.perf_counter()
    try:
        problem, rho_bar = build_problem(cfg, strict=strict)
        summary.update(COMMANDS[command](cfg, problem, rho_bar, out))
    except (ConfigError, GridMismatch) as exc:
        # a mis-sized table or kernel file is a configuration problem
        summary.update(status="error", category="config", message=str(exc))
        code = EXIT_CONFIG
    except HartreeIopError as exc:
        summary.update(status="error", category=exc.category, message=str(exc))
        code = EXIT_INFEASIBLE if exc.category == "infeasible" else EXIT_SOLVER
        if hasattr(exc, "lambda1"):
            summary["lambda1_rho_bar"] = exc.lambda1
    except (OSError, ValueError) as exc:
        summary.update(status="error", category="config", message=str(exc))
        code = EXIT_CONFIG
    if code == EXIT_OK and summary["status"] != "ok":
        code = EXIT_CHECK
    summary = _jsonable(summary)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        # wall time lives apart from the summary so summaries stay reproducible
        (out / "timing.json").write_text(
            json.dumps({"wall_time": time.perf_counter() - t0}) + "\n")
    return code, summary


def build_parser():
    parser = argparse.ArgumentParser(prog="hartree-iop", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="flat 'section.key = value' file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="K=V", help="override one configuration key (repeatable)")
    parser.add_argument("--out", type=Path, help="directory for summary.json and CSV dumps")
    parser.add_argument("--seed", type=int, help="seed for randomised probes")
    parser.add_argument("--strict", action="store_true", help="escalate warnings to errors")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
    except ConfigError as exc:
        print(json.dumps({"command": args.command, "status": "error", "category": "config",
                          "message": str(exc)}, indent=2))
        return EXIT_CONFIG
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    code, summary = run(args.command, cfg, args.out, strict=args.strict)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
