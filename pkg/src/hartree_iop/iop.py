"""Inverse optimal problem, principal solutions, the dual problem and branch sweeps.

The minimiser of the inverse problem differs from the reference kernel by a
rank-one term, ``rho_hat = rho_bar - gamma u u^T``, where ``u`` solves the
nonlinear eigenproblem

    L[rho_bar] u + gamma w_H(u) u = lam u

and ``u / |u|`` is the principal eigenvector of ``L[rho_hat]``. Everything
here reduces to computing that ``u``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (BracketFailure, HartreeIopError, KappaNonpositive, LambdaBelowThreshold,
                     NegativeDiagonal, NoConvergence, ScfStagnation)
from .operators import HartreeProblem, Kernel, hartree_potential, lmu_dist2, lmu_norm2
from .spectral import EigenPair, align, eigenpair, fix_sign, principal_eigenpair
from .variational import energy, initial_guess

log = logging.getLogger(__name__)


@dataclass
class ScfOptions:
    beta: float = 0.5
    min_beta: float = 1.0 / 64
    max_iters: int = 500
    change_tol: float = 1e-10
    residual_tol: float = 1e-8
    margin: float = 1e-10
    stagnation_window: int = 60
    max_doublings: int = 60
    amplitude_tol: float = 1e-12
    eig_tol: float = 1e-11


@dataclass
class PrincipalSolution:
    u: np.ndarray
    pde_residual: float
    iterations: int
    amplitude: float
    lambda1_bar: float
    residual_history: list = field(default_factory=list, repr=False)


@dataclass
class IopSolution:
    lam: float
    rho_hat: Kernel
    u_hat: np.ndarray
    varpi: float
    phat: float
    lambda_check: float
    pde_residual: float
    reconstruction_defect: float
    principal_defect: float
    lambda1_bar: float
    iterations: int = 0


@dataclass
class DualSolution:
    kappa: float
    lambda_star: float
    rho_check: Kernel
    u_hat: np.ndarray
    constraint_defect: float
    lambda_check: float
    lambda1_bar: float
    evaluations: int


@dataclass
class BranchPoint:
    lam: float
    u_norm_l2: float
    energy: float
    pde_residual: float
    error: str = None


def is_threshold(lam, lambda1, margin=1e-10):
    return abs(lam - lambda1) <= margin * max(1.0, abs(lambda1))


def _amplitude_solve(op0, profile, lam, gamma, s0, v0, opts):
    """Find ``s >= 0`` with ``lambda1(op0 + gamma s diag(profile)) = lam``.

    ``s -> lambda1`` is concave and increasing, so Newton steps taken from
    either side of the root land below it and then climb monotonically.
    Bisection on a doubled bracket is the fallback.
    """
    sqw = np.sqrt(op0.grid.weight)
    target = opts.amplitude_tol * max(1.0, abs(lam))
    evals = 0

    def solve(s, v):
        nonlocal evals
        evals += 1
        return principal_eigenpair(op0.shifted(gamma * s * profile), tol=opts.eig_tol, v0=v)

    s, pair = s0, solve(s0, v0)
    lo, hi = 0.0, np.inf
    for _ in range(60):
        f = pair.lambda1 - lam
        if abs(f) <= target:
            return s, pair, evals
        if f < 0:
            lo = max(lo, s)
        else:
            hi = min(hi, s)
        x = pair.phi1 * sqw
        slope = gamma * float(x @ (profile * x))
        s_new = s - f / slope if slope > 0 else np.nan
        if not (lo <= s_new <= hi) or s_new == s:
            break
        s, pair = s_new, solve(s_new, pair.phi1)

    # bisection fallback in the amplitude t = sqrt(s)
    t_lo = np.sqrt(lo)
    t_hi = np.sqrt(hi) if np.isfinite(hi) else max(1.0, 2.0 * t_lo)
    if not np.isfinite(hi):
        for _ in range(opts.max_doublings):
            pair = solve(t_hi**2, pair.phi1)
            if pair.lambda1 > lam:
                break
            t_lo, t_hi = t_hi, 2.0 * t_hi
        else:
            raise BracketFailure(f"amplitude bracket not found below t = {t_hi:.3e}")
    for _ in range(200):
        t = 0.5 * (t_lo + t_hi)
        pair = solve(t * t, pair.phi1)
        f = pair.lambda1 - lam
        if abs(f) <= target or t_hi - t_lo <= 1e-15 * t_hi:
            return t * t, pair, evals
        if f < 0:
            t_lo = t
        else:
            t_hi = t
    return t * t, pair, evals


def principal_solve(problem: HartreeProblem, lam, rho_bar: Kernel, opts: ScfOptions = None,
                    u0=None, pair: EigenPair = None) -> PrincipalSolution:
    """Self-consistent field iteration for the principal solution at ``lam``.

    Each sweep freezes the shape ``psi = u / |u|`` in the Hartree term, picks the
    amplitude ``t`` so that ``L[rho_bar] + gamma t^2 diag(w_H(psi))`` has
    principal eigenvalue ``lam``, and mixes ``u <- (1 - beta) u + beta t phi``.
    """
    opts = opts or ScfOptions()
    g = problem.grid
    gamma = problem.gamma
    op0 = problem.operator(rho_bar)
    if pair is None:
        pair = principal_eigenpair(op0, tol=opts.eig_tol)
    if lam <= pair.lambda1 + opts.margin:
        raise LambdaBelowThreshold(lam, pair.lambda1)

    u = initial_guess(problem, lam, pair) if u0 is None else g.check(u0).copy()
    if not np.any(u):
        u = initial_guess(problem, lam, pair)
    beta = opts.beta
    s, v = 0.0, pair.phi1
    res = problem.pde_residual(lam, rho_bar, u)
    history = [res]
    for it in range(1, opts.max_iters + 1):
        psi = u / g.l2_norm(u)
        profile = hartree_potential(g, psi)
        try:
            s, inner, _ = _amplitude_solve(op0, profile, lam, gamma, s, v, opts)
        except NoConvergence as exc:
            raise ScfStagnation(f"eigensolve failed inside SCF: {exc}") from exc
        v = inner.phi1
        u_new = (1.0 - beta) * u + beta * np.sqrt(s) * align(inner.phi1, u)
        change = g.l2_norm(u_new - u) / g.l2_norm(u_new)
        res_new = problem.pde_residual(lam, rho_bar, u_new)
        # the first step leaves the small initial guess, so its residual is not comparable
        if it > 1 and res_new > res:
            beta = max(0.5 * beta, opts.min_beta)
        u, res = u_new, res_new
        history.append(res)
        small = res <= opts.residual_tol * max(1.0, g.l2_norm(u))
        w = opts.stagnation_window
        plateau = len(history) > w and min(history[-w:]) > 0.9 * min(history[:-w])
        # close to threshold the amplitude is ill-conditioned and the change
        # settles at a noise floor; a plateau below tolerance is convergence
        if small and (change <= opts.change_tol or plateau):
            u = fix_sign(u)
            return PrincipalSolution(u, res, it, float(np.sqrt(s)), pair.lambda1, history)
        if plateau:
            raise ScfStagnation(f"SCF residual plateau at {res:.3e} after {it} iterations")
    raise ScfStagnation(f"SCF did not converge in {opts.max_iters} iterations "
                        f"(residual {res:.3e})")


def iop_solve(problem: HartreeProblem, lam, rho_bar: Kernel, opts: ScfOptions = None,
              u0=None, pair: EigenPair = None) -> IopSolution:
    """Nearest kernel to ``rho_bar`` (in the weighted norm) with principal eigenvalue ``lam``."""
    opts = opts or ScfOptions()
    g = problem.grid
    gamma = problem.gamma
    if pair is None:
        pair = eigenpair(problem, rho_bar, tol=opts.eig_tol)
    if is_threshold(lam, pair.lambda1, opts.margin):
        zero = np.zeros(g.size)
        return IopSolution(lam, rho_bar, zero, 0.0, 0.0, pair.lambda1, 0.0, 0.0, 0.0,
                           pair.lambda1)
    sol = principal_solve(problem, lam, rho_bar, opts, u0=u0, pair=pair)
    u = sol.u
    rank_one = gamma * np.outer(u, u)
    rho_hat = Kernel(g, rho_bar.values - rank_one, rank_hint=None)
    check = principal_eigenpair(problem.operator(rho_hat), tol=opts.eig_tol, v0=u)
    phi = u / g.l2_norm(u)
    principal_defect = g.l2_norm(align(check.phi1, phi) - phi)
    return IopSolution(
        lam=lam,
        rho_hat=rho_hat,
        u_hat=u,
        varpi=gamma * g.l2_norm(u) ** 2,
        phat=lmu_dist2(rho_bar, rho_hat),
        lambda_check=check.lambda1,
        pde_residual=sol.pde_residual,
        reconstruction_defect=float(np.abs(rho_hat.values + rank_one - rho_bar.values).max()),
        principal_defect=principal_defect,
        lambda1_bar=pair.lambda1,
        iterations=sol.iterations,
    )


def recover_u_from_diagonals(rho_bar: Kernel, rho_hat: Kernel, gamma=1.0, tol_neg=1e-10):
    """``|u|`` at every node from the diagonal gap ``(rho_bar_ii - rho_hat_ii) / gamma``."""
    gap = (rho_bar.diagonal - rho_hat.diagonal) / gamma
    if np.any(gap < -tol_neg):
        i = int(np.argmin(gap))
        raise NegativeDiagonal(f"diagonal gap {gap[i]:.3e} at node {i} is negative")
    return np.sqrt(np.maximum(gap, 0.0))


def phat(problem: HartreeProblem, lam, rho_bar: Kernel, opts: ScfOptions = None, u0=None,
         pair: EigenPair = None) -> float:
    return iop_solve(problem, lam, rho_bar, opts, u0=u0, pair=pair).phat


@dataclass
class DualOptions:
    tol: float = 1e-8
    lower_offset: float = 1e-8
    first_upper: float = 1.0
    max_expand: int = 60
    max_evals: int = 200
    scf: ScfOptions = field(default_factory=lambda: ScfOptions(residual_tol=1e-11,
                                                               change_tol=1e-12))


def dual_solve(problem: HartreeProblem, kappa, rho_bar: Kernel,
               opts: DualOptions = None) -> DualSolution:
    """Largest principal eigenvalue on the sphere ``|rho_bar - rho|^2 = kappa``.

    Inverts the increasing map ``lam -> phat(lam)`` on a bracket. Steps are
    Illinois false-position steps on ``sqrt(phat) - sqrt(kappa)``, which is
    close to linear in ``lam``, and every step stays inside the bracket.
    """
    opts = opts or DualOptions()
    if not kappa > 0:
        raise KappaNonpositive(f"kappa must be positive, got {kappa}")
    pair = eigenpair(problem, rho_bar, tol=opts.scf.eig_tol)
    l1 = pair.lambda1
    cache = {}
    evals = 0

    def solve(lam):
        nonlocal evals
        evals += 1
        # warm start from the nearest solved point
        u0 = None
        if cache:
            near = min(cache, key=lambda k: abs(k - lam))
            u0 = cache[near].u_hat
        sol = iop_solve(problem, lam, rho_bar, opts.scf, u0=u0, pair=pair)
        cache[lam] = sol
        return sol

    def done(sol):
        return abs(sol.phat - kappa) <= opts.tol * max(1.0, kappa)

    lo = l1 + opts.lower_offset
    sol_lo = solve(lo)
    if sol_lo.phat >= kappa:
        lo, sol_lo = l1, iop_solve(problem, l1, rho_bar, opts.scf, pair=pair)
        hi, sol_hi = l1 + opts.lower_offset, cache[l1 + opts.lower_offset]
    else:
        offset = opts.first_upper
        for _ in range(opts.max_expand):
            hi = l1 + offset
            sol_hi = solve(hi)
            if sol_hi.phat >= kappa:
                break
            lo, sol_lo = hi, sol_hi
            offset *= 2.0
        else:
            raise BracketFailure(f"kappa = {kappa} not reached below lambda = {hi}")

    best = sol_hi if done(sol_hi) else sol_lo if done(sol_lo) else None
    sk = np.sqrt(kappa)
    f_lo, f_hi = np.sqrt(sol_lo.phat) - sk, np.sqrt(sol_hi.phat) - sk
    side = 0
    while best is None:
        if evals >= opts.max_evals:
            raise BracketFailure(f"dual bisection did not reach tolerance in {evals} solves")
        lam = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        if not lo < lam < hi:
            lam = 0.5 * (lo + hi)
        sol = solve(lam)
        f = np.sqrt(sol.phat) - sk
        if done(sol) or hi - lo <= 1e-15 * max(1.0, abs(hi)):
            best = sol
        elif f < 0:
            lo, f_lo = lam, f
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = lam, f
            if side == 1:
                f_lo *= 0.5
            side = 1

    return DualSolution(
        kappa=kappa,
        lambda_star=best.lam,
        rho_check=best.rho_hat,
        u_hat=best.u_hat,
        constraint_defect=abs(best.phat - kappa),
        lambda_check=best.lambda_check,
        lambda1_bar=l1,
        evaluations=evals,
    )


def branch_sweep(problem: HartreeProblem, rho_bar: Kernel, lambda_grid,
                 opts: ScfOptions = None) -> list:
    """Principal solutions along an ascending ``lam`` grid with warm starts.

    Failures are recorded on the point and the sweep moves on.
    """
    opts = opts or ScfOptions()
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("lambda_grid must be sorted ascending")
    g = problem.grid
    pair = eigenpair(problem, rho_bar, tol=opts.eig_tol)
    points = []
    u_prev = None
    for lam in grid:
        lam = float(lam)
        if is_threshold(lam, pair.lambda1, opts.margin):
            points.append(BranchPoint(lam, 0.0, 0.0, 0.0))
            continue
        try:
            sol = principal_solve(problem, lam, rho_bar, opts, u0=u_prev, pair=pair)
        except HartreeIopError as exc:
            points.append(BranchPoint(lam, np.nan, np.nan, np.nan,
                                      error=f"{exc.category}: {exc}"))
            continue
        u_prev = sol.u
        points.append(BranchPoint(lam, g.l2_norm(sol.u), energy(problem, lam, rho_bar, sol.u),
                                  sol.pde_residual))
    return points


@dataclass
class PerturbationReport:
    sigma_norms: np.ndarray
    distances: np.ndarray
    w_distances: np.ndarray

    @property
    def lipschitz(self):
        """Ratios ``distance / |sigma|`` (nan where ``sigma`` vanishes)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.sigma_norms > 0, self.distances / self.sigma_norms, np.nan)


def kernel_perturbation_probe(problem: HartreeProblem, rho_bar: Kernel, lam, perturbations,
                              opts: ScfOptions = None) -> PerturbationReport:
    """Distances between principal solutions at ``rho_bar + sigma_k`` and at ``rho_bar``."""
    opts = opts or ScfOptions(residual_tol=1e-11, change_tol=1e-12)
    g = problem.grid
    ref = principal_solve(problem, lam, rho_bar, opts).u
    norms, dist, wdist = [], [], []
    for sigma in perturbations:
        nrm = np.sqrt(lmu_norm2(sigma))
        norms.append(nrm)
        if nrm == 0.0:
            dist.append(0.0)
            wdist.append(0.0)
            continue
        u = principal_solve(problem, lam, rho_bar + sigma, opts, u0=ref).u
        diff = align(u, ref) - ref
        dist.append(g.l2_norm(diff))
        wdist.append(np.sqrt(max(problem.w_norm2(diff), 0.0)))
    return PerturbationReport(np.array(norms), np.array(dist), np.array(wdist))
