"""Principal eigenpairs of L[rho] and derived spectral diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import EigensolveFailed, NoConvergence, ZeroVector
from .operators import HartreeProblem, Kernel, OperatorMatrix


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Smallest eigenvalue and its L^2-normalised, sign-fixed eigenvector."""

    lambda1: float
    phi1: np.ndarray
    residual: float
    iterations: int = 0
    method: str = "inverse"


def fix_sign(v, rel_tie=1e-12):
    """Flip ``v`` so its sum is nonnegative; near-ties go by the first nonzero entry."""
    s = v.sum()
    if abs(s) <= rel_tie * np.abs(v).sum():
        nz = np.flatnonzero(np.abs(v) > rel_tie * np.abs(v).max())
        if nz.size and v[nz[0]] < 0:
            return -v
        return v
    return v if s >= 0 else -v


def gershgorin_lower(a):
    d = np.diag(a)
    radius = np.abs(a).sum(axis=1) - np.abs(d)
    return float(np.min(d - radius))


def _default_start(n):
    # all ones plus a small ramp so odd principal modes are not missed
    return np.ones(n) + 0.1 * np.linspace(-1.0, 1.0, n)


def _rq(a, x):
    ax = a @ x
    theta = float(x @ ax)
    return theta, float(np.linalg.norm(ax - theta * x))


def _inverse_iteration(a, x, tol, max_iters):
    """Fixed-shift inverse iteration, then Rayleigh quotient refinement.

    ``x`` must have unit Euclidean norm. Returns ``(theta, x, residual, iters)``.
    For unit ``x`` the Euclidean residual equals the L^2 residual of the
    L^2-normalised vector, so ``tol`` is used as is.
    """
    n = a.shape[0]
    scale = max(1.0, float(np.abs(a).max()))
    theta, res = _rq(a, x)
    switch = max(tol, 1e-6 * scale)
    it = 0
    lu = None
    while res > switch and it < max_iters:
        if lu is None:
            # warm starts often skip this factorisation entirely
            sigma = gershgorin_lower(a)
            sigma -= 1e-3 * max(1.0, abs(sigma))
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                lu = sla.lu_factor(a - sigma * np.eye(n), check_finite=False)
        y = sla.lu_solve(lu, x, check_finite=False)
        x = y / np.linalg.norm(y)
        theta, res = _rq(a, x)
        it += 1
    if res > switch:
        raise NoConvergence(f"inverse iteration stalled at residual {res:.3e}", max_iters)
    theta_ref = theta
    # a few Rayleigh quotient steps; near-singular solves are the point here
    for _ in range(6):
        if res <= 1e-3 * tol:
            break
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            y = sla.solve(a - theta * np.eye(n), x, assume_a="sym", check_finite=False)
        if not np.all(np.isfinite(y)):
            break
        x_new = y / np.linalg.norm(y)
        theta_new, res_new = _rq(a, x_new)
        if res_new >= res:
            break
        x, theta, res = x_new, theta_new, res_new
        it += 1
    if theta > theta_ref + 10 * res + 1e-12 * scale:
        raise NoConvergence("Rayleigh refinement left the bottom of the spectrum")
    if res > tol:
        raise NoConvergence(f"residual {res:.3e} above tolerance {tol:.1e}", max_iters)
    return theta, x, res, it


def principal_eigenpair(op, tol=1e-9, v0=None, max_iters=500, method="auto") -> EigenPair:
    """Smallest eigenpair of a symmetric operator.

    ``op`` is an :class:`OperatorMatrix`. ``method`` is ``"inverse"`` (raise
    :class:`NoConvergence` on failure), ``"dense"`` (LAPACK subset solve) or
    ``"auto"`` (inverse iteration with a dense fallback).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = op.matrix
    w = op.grid.weight
    n = a.shape[0]
    x = _default_start(n) if v0 is None else np.array(v0, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0 or not np.isfinite(nrm):
        x, nrm = _default_start(n), np.linalg.norm(_default_start(n))
    x = x / nrm

    if method in ("inverse", "auto"):
        try:
            theta, x, res, it = _inverse_iteration(a, x, tol, max_iters)
            return EigenPair(theta, fix_sign(x) / np.sqrt(w), res, it, "inverse")
        except (NoConvergence, sla.LinAlgError, sla.LinAlgWarning):
            if method == "inverse":
                raise
    elif method != "dense":
        raise ValueError(f"unknown method {method!r}")
    return _dense_eigenpair(a, w, tol)


def _dense_eigenpair(a, w, tol):
    try:
        vals, vecs = sla.eigh(a, subset_by_index=[0, 0])
    except sla.LinAlgError as exc:
        raise EigensolveFailed(str(exc)) from exc
    x = vecs[:, 0]
    theta, res = _rq(a, x)
    if res > max(tol, 1e-10 * max(1.0, np.abs(a).max())):
        raise EigensolveFailed(f"dense eigensolver residual {res:.3e}")
    return EigenPair(theta, fix_sign(x) / np.sqrt(w), res, 0, "dense")


def lowest_eigenvalues(op, k=2):
    return sla.eigh(op.matrix, eigvals_only=True, subset_by_index=[0, k - 1])


def rayleigh(op, u) -> float:
    """``<L u, u> / <u, u>``; the quadrature weight cancels."""
    u = op.grid.check(u)
    uu = float(u @ u)
    if uu == 0.0:
        raise ZeroVector("Rayleigh quotient of the zero vector")
    return float(u @ (op.matrix @ u)) / uu


def eigenpair(problem: HartreeProblem, rho: Kernel, tol=1e-9, v0=None) -> EigenPair:
    return principal_eigenpair(problem.operator(rho), tol=tol, v0=v0)


def lambda1(problem: HartreeProblem, rho: Kernel, tol=1e-9) -> float:
    return eigenpair(problem, rho, tol=tol).lambda1


def dlambda1(problem: HartreeProblem, rho: Kernel, h: Kernel, pair: EigenPair = None) -> float:
    """Directional derivative of ``lambda1`` at ``rho`` along ``h``.

    ``-(1/|phi|^2) w^2 sum_ij phi_i phi_j R_ij h_ij`` with ``phi`` the principal
    eigenvector of ``L[rho]``.
    """
    g = problem.grid
    if pair is None:
        try:
            pair = eigenpair(problem, rho, tol=1e-11)
        except NoConvergence as exc:
            raise EigensolveFailed(str(exc)) from exc
    phi = pair.phi1
    norm2 = g.weight * float(phi @ phi)
    form = g.weight**2 * float(phi @ ((g.riesz.weights * h.values) @ phi))
    return -form / norm2


@dataclass
class ConcavityReport:
    t: np.ndarray
    lambda_t: np.ndarray
    chord: np.ndarray
    defects: np.ndarray = field(init=False)

    def __post_init__(self):
        self.defects = self.lambda_t - self.chord

    @property
    def min_defect(self):
        return float(self.defects.min())


def concavity_probe(problem, rho1: Kernel, rho2: Kernel, t_samples, tol=1e-11) -> ConcavityReport:
    """Compare ``lambda1`` along a chord with the linear interpolation of its endpoints."""
    t = np.asarray(t_samples, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t_samples must lie in [0, 1]")
    l1 = lambda1(problem, rho1, tol=tol)
    l2 = lambda1(problem, rho2, tol=tol)
    lam_t = np.empty_like(t)
    for k, tk in enumerate(t):
        if tk == 1.0:
            lam_t[k] = l1
        elif tk == 0.0:
            lam_t[k] = l2
        else:
            mixed = Kernel(problem.grid, tk * rho1.values + (1.0 - tk) * rho2.values)
            lam_t[k] = lambda1(problem, mixed, tol=tol)
    return ConcavityReport(t, lam_t, t * l1 + (1.0 - t) * l2)


def align(u, ref):
    """``u`` or ``-u``, whichever is closer to ``ref``."""
    return u if np.dot(u, ref) >= 0 else -u
