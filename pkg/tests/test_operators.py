import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartree_iop.errors import GridMismatch
from hartree_iop.grid import GridSpec, build_grid, build_potential
from hartree_iop.operators import (HartreeProblem, Kernel, assemble_operator, exchange_apply,
                                   hartree_potential, laplacian_matrix, lmu_dist2, lmu_inner,
                                   lmu_norm2)


@pytest.fixture(scope="module")
def grid():
    return build_grid(GridSpec(1, 6.0, 41, 0.5))


@pytest.fixture(scope="module")
def pot(grid):
    return build_potential(grid, "harmonic_plus", c=1.0)


def random_kernel(grid, rng):
    a = rng.normal(size=(grid.size, grid.size))
    return Kernel(grid, a + a.T)


def quadrature_pair(grid, rho, u, v):
    """Direct double sum of w^2 sum_ij rho_ij R_ij u_j v_i."""
    w, r = grid.weight, grid.riesz.weights
    total = 0.0
    for i in range(grid.size):
        for j in range(grid.size):
            total += w * w * rho.values[i, j] * r[i, j] * u[j] * v[i]
    return total


def test_exchange_zero_cases(grid, rng):
    u = rng.normal(size=grid.size)
    assert np.all(exchange_apply(Kernel.zeros(grid), u) == 0)
    assert np.all(exchange_apply(random_kernel(grid, rng), np.zeros(grid.size)) == 0)


def test_exchange_self_adjoint(grid, rng):
    rho = random_kernel(grid, rng)
    u, v = rng.normal(size=grid.size), rng.normal(size=grid.size)
    lhs = grid.inner(exchange_apply(rho, u), v)
    rhs = grid.inner(u, exchange_apply(rho, v))
    assert lhs == pytest.approx(quadrature_pair(grid, rho, u, v), rel=1e-12)
    assert rhs == pytest.approx(quadrature_pair(grid, rho, v, u), rel=1e-12)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_kernel_symmetrised_and_frozen(grid, rng):
    a = rng.normal(size=(grid.size, grid.size))
    k = Kernel(grid, a)
    np.testing.assert_array_equal(k.values, k.values.T)
    with pytest.raises(ValueError):
        k.values[0, 0] = 1.0


def test_kernel_grid_checks(grid):
    twin = build_grid(GridSpec(1, 6.0, 41, 0.5))
    assert lmu_norm2(Kernel.zeros(grid) + Kernel.zeros(twin)) == 0
    other = build_grid(GridSpec(1, 6.0, 41, 0.4))
    with pytest.raises(GridMismatch):
        Kernel.zeros(grid) + Kernel.zeros(other)
    with pytest.raises(GridMismatch):
        Kernel(grid, np.zeros((3, 3)))


def test_hartree_potential(grid, rng):
    assert np.all(hartree_potential(grid, np.zeros(grid.size)) == 0)
    u = rng.normal(size=grid.size)
    assert hartree_potential(grid, u).min() > 0
    k = 17
    spike = np.zeros(grid.size)
    spike[k] = 1.0 / np.sqrt(grid.weight)
    np.testing.assert_allclose(hartree_potential(grid, spike), grid.riesz.weights[:, k],
                               rtol=1e-14)


def test_operator_stencil_zero_kernel(grid, pot):
    m = assemble_operator(Kernel.zeros(grid), pot).matrix
    h2 = grid.h**2
    np.testing.assert_allclose(np.diag(m), 2 / h2 + pot.values, rtol=1e-14)
    np.testing.assert_allclose(np.diag(m, 1), -1 / h2, rtol=1e-14)
    np.testing.assert_allclose(np.diag(m, -1), -1 / h2, rtol=1e-14)
    assert np.count_nonzero(np.triu(m, 2)) == 0
    assert np.abs(m - m.T).max() == 0


def test_operator_linear_in_kernel(grid, pot, rng):
    r1, r2 = random_kernel(grid, rng), random_kernel(grid, rng)
    m = lambda r: assemble_operator(r, pot).matrix
    base = laplacian_matrix(grid) + np.diag(pot.values)
    np.testing.assert_allclose(m(r1 + r2), m(r1) + m(r2) - base, atol=1e-11)
    assert np.abs(m(r1) - m(r1).T).max() == 0


def test_two_dimensional_laplacian():
    g = build_grid(GridSpec(2, 2.0, 16, 1.0))
    a = laplacian_matrix(g)
    # separable spectrum: smallest eigenvalue is twice the 1D one
    a1 = laplacian_matrix(build_grid(GridSpec(1, 2.0, 16, 0.5)))
    assert np.linalg.eigvalsh(a)[0] == pytest.approx(2 * np.linalg.eigvalsh(a1)[0], rel=1e-12)


def test_lmu_norm_basics(grid, rng):
    rho = random_kernel(grid, rng)
    assert lmu_norm2(Kernel.zeros(grid)) == 0
    assert lmu_norm2(3.7 * rho) == pytest.approx(3.7**2 * lmu_norm2(rho), rel=1e-13)


def test_lmu_norm_rank_one_double_loop(grid, rng):
    f = rng.normal(size=grid.size)
    rho = Kernel.outer(grid, f)
    w, r = grid.weight, grid.riesz.weights
    total = 0.0
    for i in range(grid.size):
        for j in range(grid.size):
            total += (f[i] * f[j]) ** 2 * r[i, j]
    assert lmu_norm2(rho) == pytest.approx(w * w * total, rel=1e-12)


def test_lmu_dist(grid, rng):
    a, b = random_kernel(grid, rng), random_kernel(grid, rng)
    assert lmu_dist2(a, a) == 0
    assert lmu_dist2(Kernel.zeros(grid), b) == pytest.approx(lmu_norm2(b), rel=1e-14)
    assert lmu_dist2(a, b) == pytest.approx(lmu_norm2(a) - 2 * lmu_inner(a, b) + lmu_norm2(b),
                                            rel=1e-10)
    for _ in range(100):
        a, b = random_kernel(grid, rng), random_kernel(grid, rng)
        assert np.sqrt(lmu_dist2(a, b)) <= np.sqrt(lmu_norm2(a)) + np.sqrt(lmu_norm2(b))


def test_gaussian_product_formula(grid):
    k = Kernel.gaussian_product(grid, 0.5, 1.0)
    x = grid.axis
    expected = 0.5 * np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / 2.0)
    np.testing.assert_allclose(k.values, expected, rtol=1e-14)
    assert k.is_nonnegative()


def test_kernel_save_header(grid, tmp_path):
    k = Kernel.gaussian_product(grid, 0.5, 1.0)
    path = tmp_path / "k.txt"
    k.save(path)
    assert path.read_text().splitlines()[0] == "# n=41 mu=0.5 L=6.0"
    np.testing.assert_allclose(Kernel.from_file(grid, path).values, k.values, rtol=1e-15)


def test_pde_residual_vector(grid, pot, rng):
    prob = HartreeProblem(pot, gamma=0.7)
    rho = random_kernel(grid, rng)
    u = rng.normal(size=grid.size)
    op = assemble_operator(rho, pot).matrix
    w_h = grid.weight * grid.riesz.weights @ (u * u)
    np.testing.assert_allclose(prob.pde_residual_vector(2.0, rho, u),
                               op @ u + 0.7 * w_h * u - 2.0 * u, rtol=1e-10, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exchange_symmetry_property(seed):
    g = build_grid(GridSpec(1, 3.0, 16, 0.3))
    rng = np.random.default_rng(seed)
    rho = random_kernel(g, rng)
    u, v = rng.normal(size=g.size), rng.normal(size=g.size)
    a, b = g.inner(exchange_apply(rho, u), v), g.inner(u, exchange_apply(rho, v))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
