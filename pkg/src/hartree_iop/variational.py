"""Energy functional, its derivatives and ground states by gradient descent."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import EigensolveFailed, LambdaBelowThreshold, LineSearchFailed, MaxIters
from .operators import HartreeProblem, Kernel, hartree_potential
from .spectral import EigenPair, eigenpair, fix_sign


def energy(problem: HartreeProblem, lam, rho_bar: Kernel, u) -> float:
    """``E = 1/2 <(L[rho_bar] - lam) u, u> + gamma/4 <w_H(u) u, u>``."""
    g = problem.grid
    u = g.check(u)
    lu = problem.base_matrix @ u - rho_bar.exchange_matrix @ u
    quad = g.weight * float(u @ lu) - lam * g.weight * float(u @ u)
    quartic = g.weight * float(hartree_potential(g, u) @ (u * u))
    return 0.5 * quad + 0.25 * problem.gamma * quartic


def energy_change(problem: HartreeProblem, lam, rho_bar: Kernel, u, d) -> float:
    """``E(u + d) - E(u)`` expanded in ``d``.

    Free of the cancellation that subtracting two nearly equal energies
    suffers, which matters once steps shrink below the energy's roundoff.
    """
    g = problem.grid
    w = g.weight
    lu = problem.base_matrix @ u - rho_bar.exchange_matrix @ u - lam * u
    ld = problem.base_matrix @ d - rho_bar.exchange_matrix @ d - lam * d
    quad = w * float(lu @ d) + 0.5 * w * float(ld @ d)
    delta = d * (2.0 * u + d)
    r = g.riesz.weights
    quartic = w * w * (2.0 * float((u * u) @ (r @ delta)) + float(delta @ (r @ delta)))
    return quad + 0.25 * problem.gamma * quartic


def energy_grad(problem: HartreeProblem, lam, rho_bar: Kernel, u) -> np.ndarray:
    """L^2 gradient: ``L[rho_bar] u - lam u + gamma w_H(u) u``."""
    return problem.pde_residual_vector(lam, rho_bar, u)


def hessian_matrix(problem: HartreeProblem, lam, rho_bar: Kernel, u) -> np.ndarray:
    """Second variation as a symmetric matrix acting on node values.

    ``L[rho_bar] - lam + gamma diag(w_H(u)) + 2 gamma Q(u)`` with
    ``Q_ij = w R_ij u_i u_j``.
    """
    g = problem.grid
    u = g.check(u)
    op = problem.operator(rho_bar).matrix
    q = g.weight * g.riesz.weights * np.outer(u, u)
    hm = op - lam * np.eye(g.size) + problem.gamma * np.diag(hartree_potential(g, u))
    hm = hm + 2.0 * problem.gamma * q
    return 0.5 * (hm + hm.T)


def hessian_min_eig(problem: HartreeProblem, lam, rho_bar: Kernel, u) -> float:
    try:
        return float(sla.eigh(hessian_matrix(problem, lam, rho_bar, u), eigvals_only=True,
                              subset_by_index=[0, 0])[0])
    except sla.LinAlgError as exc:
        raise EigensolveFailed(str(exc)) from exc


@dataclass
class GroundState:
    u: np.ndarray
    energy: float
    grad_norm: float
    lam: float
    iterations: int
    sign_definite: bool
    hessian_min_eig: float = None
    energy_history: list = field(default_factory=list, repr=False)


@dataclass
class DescentOptions:
    tol: float = 1e-8
    max_iters: int = 50_000
    margin: float = 1e-10
    armijo_c: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    record_history: bool = False
    certify: bool = False


def initial_guess(problem, lam, pair: EigenPair):
    """``0.1 sqrt(lam - lambda1) phi1``: small amplitude along the principal mode."""
    return 0.1 * np.sqrt(max(lam - pair.lambda1, 0.0)) * pair.phi1


def check_threshold(lam, pair: EigenPair, margin):
    if lam <= pair.lambda1 + margin:
        raise LambdaBelowThreshold(lam, pair.lambda1)


def ground_state(problem: HartreeProblem, lam, rho_bar: Kernel, opts: DescentOptions = None,
                 u0=None, pair: EigenPair = None) -> GroundState:
    """Minimise the energy by gradient descent with Armijo backtracking.

    Trial steps come from the Barzilai-Borwein formula after the first
    iteration; every accepted step lowers the energy.
    """
    opts = opts or DescentOptions()
    g = problem.grid
    if pair is None:
        pair = eigenpair(problem, rho_bar, tol=1e-11)
    check_threshold(lam, pair, opts.margin)

    u = initial_guess(problem, lam, pair) if u0 is None else g.check(u0).copy()
    e = energy(problem, lam, rho_bar, u)
    grad = energy_grad(problem, lam, rho_bar, u)
    gnorm = g.l2_norm(grad)
    history = [e] if opts.record_history else []
    # first trial step: inverse of a cheap curvature bound
    step = 1.0 / max(1.0, float(np.abs(problem.operator(rho_bar).matrix).sum(axis=1).max()))
    it = 0
    while gnorm > opts.tol * max(1.0, g.l2_norm(u)):
        if it >= opts.max_iters:
            raise MaxIters(f"ground state descent stopped at |grad| = {gnorm:.3e} "
                           f"after {it} iterations")
        g2 = gnorm**2
        alpha = step
        for _ in range(opts.max_backtracks):
            de = energy_change(problem, lam, rho_bar, u, -alpha * grad)
            if de <= -opts.armijo_c * alpha * g2:
                break
            alpha *= opts.shrink
        else:
            raise LineSearchFailed(f"no Armijo step found at iteration {it}")
        u_new = u - alpha * grad
        e_new = e + de
        grad_new = energy_grad(problem, lam, rho_bar, u_new)
        s = u_new - u
        y = grad_new - grad
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 2.0 * alpha
        u, e, grad = u_new, e_new, grad_new
        gnorm = g.l2_norm(grad)
        if opts.record_history:
            history.append(e)
        it += 1

    u = fix_sign(u)
    amax = np.abs(u).max()
    sign_definite = bool(amax > 0 and u.min() >= -1e-10 * amax)
    if sign_definite and rho_bar.is_nonnegative():
        # E(|u|) <= E(u) for a nonnegative kernel, so folding the roundoff-level
        # sign flips of the far tail cannot raise the energy
        u = np.abs(u)
        gnorm = g.l2_norm(energy_grad(problem, lam, rho_bar, u))
    e = energy(problem, lam, rho_bar, u)
    hmin = hessian_min_eig(problem, lam, rho_bar, u) if opts.certify else None
    return GroundState(u=u, energy=e, grad_norm=gnorm, lam=lam, iterations=it,
                       sign_definite=sign_definite, hessian_min_eig=hmin,
                       energy_history=history)
