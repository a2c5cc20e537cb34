import numpy as np
import pytest

from conftest import gaussian, make_problem
from hartree_iop.errors import NoConvergence, ZeroVector
from hartree_iop.grid import GridSpec, build_grid
from hartree_iop.operators import Kernel, operator_from_matrix
from hartree_iop.spectral import (align, concavity_probe, dlambda1, eigenpair, fix_sign, lambda1,
                                  lowest_eigenvalues, principal_eigenpair, rayleigh)


def test_refinement_ratio():
    err = {}
    for n in (201, 401):
        prob = make_problem(n)
        err[n] = abs(lambda1(prob, Kernel.zeros(prob.grid), tol=1e-12) - 2.0)
    assert 2.8 <= err[201] / err[401] <= 5.2


def test_diagonal_matrix_exact():
    g = build_grid(GridSpec(1, 1.0, 20, 0.5))
    d = np.linspace(5.0, 1.0, 20)
    pair = principal_eigenpair(operator_from_matrix(g, np.diag(d)), tol=1e-12)
    assert pair.lambda1 == 1.0
    assert np.argmax(np.abs(pair.phi1)) == 19
    assert g.l2_norm(pair.phi1) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("method", ["inverse", "dense", "auto"])
def test_methods_agree(problem, method):
    rho = gaussian(problem)
    pair = principal_eigenpair(problem.operator(rho), tol=1e-10, method=method)
    ref = np.linalg.eigvalsh(problem.operator(rho).matrix)[0]
    assert pair.lambda1 == pytest.approx(ref, abs=1e-10)
    assert pair.phi1.sum() > 0


def test_inverse_iteration_budget(problem):
    with pytest.raises(NoConvergence):
        principal_eigenpair(problem.operator(Kernel.zeros(problem.grid)), tol=1e-12,
                            max_iters=1, method="inverse")


def test_rayleigh(problem, rng):
    rho = gaussian(problem)
    op = problem.operator(rho)
    pair = principal_eigenpair(op, tol=1e-12)
    assert rayleigh(op, pair.phi1) == pytest.approx(pair.lambda1, abs=1e-12)
    for _ in range(20):
        u = rng.normal(size=problem.grid.size)
        assert rayleigh(op, u) >= pair.lambda1 - 1e-10
        assert rayleigh(op, 2 * u) == pytest.approx(rayleigh(op, u), rel=1e-14)
    with pytest.raises(ZeroVector):
        rayleigh(op, np.zeros(problem.grid.size))


def test_sign_fix():
    assert fix_sign(np.array([-1.0, -2.0]))[0] == 1.0
    assert fix_sign(np.array([-1.0, 1.0]))[0] == 1.0
    assert fix_sign(np.array([0.0, 1.0, -1.0]))[1] == 1.0
    v = np.array([1.0, -3.0])
    assert np.array_equal(align(v, -v), -v)


def test_dlambda_zero_direction(problem):
    assert dlambda1(problem, Kernel.zeros(problem.grid), Kernel.zeros(problem.grid)) == 0.0


def test_dlambda_finite_difference(problem, rng):
    rho = Kernel.zeros(problem.grid)
    eps = 1e-5
    for _ in range(3):
        h = Kernel.gaussian_product(problem.grid, rng.uniform(-1, 1), rng.uniform(0.5, 2),
                                    center=rng.uniform(-2, 2))
        fd = (lambda1(problem, rho + eps * h, tol=1e-13)
              - lambda1(problem, rho - eps * h, tol=1e-13)) / (2 * eps)
        assert dlambda1(problem, rho, h) == pytest.approx(fd, rel=1e-5)


def test_dlambda_rank_one_negative(problem):
    f = np.exp(-problem.grid.axis**2)
    assert dlambda1(problem, gaussian(problem), Kernel.outer(problem.grid, f)) < 0


def test_concavity_trivial_cases(problem):
    r1, r2 = gaussian(problem, 0.5), gaussian(problem, -0.3, 2.0)
    rep = concavity_probe(problem, r1, r2, [0.0, 0.5, 1.0])
    assert rep.defects[0] == 0 and rep.defects[-1] == 0
    assert rep.defects[1] >= -1e-9
    same = concavity_probe(problem, r1, r1, np.linspace(0, 1, 5))
    np.testing.assert_allclose(same.defects, 0.0, atol=1e-10)
    with pytest.raises(ValueError):
        concavity_probe(problem, r1, r2, [1.5])


def test_simple_principal_eigenvalue_nonnegative_kernel(problem):
    # a nonnegative kernel keeps the operator a Z-matrix, so the bottom is simple
    rho = gaussian(problem, 2.0, 1.5)
    op = problem.operator(rho)
    l1, l2 = lowest_eigenvalues(op, 2)
    assert l2 - l1 > 0.5
    pair = principal_eigenpair(op, tol=1e-12)
    assert pair.phi1.min() > -1e-12 * np.abs(pair.phi1).max()


def test_eigenpair_continuity(problem):
    base = eigenpair(problem, gaussian(problem), tol=1e-12)
    prev = None
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        pert = eigenpair(problem, gaussian(problem, 0.5 + eps), tol=1e-12)
        d = problem.grid.l2_norm(pert.phi1 - base.phi1)
        if prev is not None:
            assert d < prev
        prev = d
    assert prev < 1e-3
