"""Nonlocal operators on a grid: exchange, Hartree potential and the L^2_mu geometry.

Wave functions are plain 1-D arrays with one value per grid node. Kernels are
dense symmetric node-pair tables wrapped in :class:`Kernel` so they carry their
grid along.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatch, InvalidGrid
from .grid import Grid, Potential


class Kernel:
    """Symmetric two-point density on grid nodes.

    Symmetry is enforced on construction by averaging with the transpose.
    """

    def __init__(self, grid: Grid, values, rank_hint=None):
        values = np.array(values, dtype=float)
        if values.shape != (grid.size, grid.size):
            raise GridMismatch(
                f"kernel has shape {values.shape}, grid needs {(grid.size, grid.size)}"
            )
        values = 0.5 * (values + values.T)
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.rank_hint = rank_hint

    # constructors

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.size, grid.size)), rank_hint=0)

    @classmethod
    def outer(cls, grid, f, scale=1.0):
        f = grid.check(f, "kernel factor")
        return cls(grid, scale * np.outer(f, f), rank_hint=1)

    @classmethod
    def from_factors(cls, grid, factors, signs=None):
        """``sum_k s_k f_k f_k^T`` for the columns ``f_k`` of ``factors``."""
        factors = np.asarray(factors, dtype=float)
        if factors.ndim == 1:
            factors = factors[:, None]
        if factors.shape[0] != grid.size:
            raise GridMismatch(f"factor matrix has {factors.shape[0]} rows, grid has {grid.size}")
        signs = np.ones(factors.shape[1]) if signs is None else np.asarray(signs, dtype=float)
        return cls(grid, (factors * signs) @ factors.T, rank_hint=factors.shape[1])

    @classmethod
    def gaussian_product(cls, grid, c=0.5, s=1.0, center=None):
        """``c * exp(-(|x - x0|^2 + |y - x0|^2) / (2 s^2))``; rank one."""
        x0 = np.zeros(grid.dimension) if center is None else np.atleast_1d(center)
        g = np.exp(-np.sum((grid.points - x0) ** 2, axis=1) / (2.0 * s**2))
        return cls.outer(grid, g, scale=c)

    @classmethod
    def from_file(cls, grid, path):
        values = np.loadtxt(Path(path), ndmin=2)
        return cls(grid, values)

    # algebra

    def _other(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        if other.grid is not self.grid and other.grid.spec != self.grid.spec:
            raise GridMismatch("kernels live on different grids")
        return other.values

    def __add__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return Kernel(self.grid, self.values + v)

    def __sub__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return Kernel(self.grid, self.values - v)

    def __mul__(self, scalar):
        if isinstance(scalar, Kernel):
            return NotImplemented
        return Kernel(self.grid, float(scalar) * self.values, rank_hint=self.rank_hint)

    __rmul__ = __mul__

    def __neg__(self):
        return Kernel(self.grid, -self.values, rank_hint=self.rank_hint)

    @property
    def diagonal(self):
        return np.diag(self.values).copy()

    @cached_property
    def exchange_matrix(self):
        """``w * rho[i, j] * R[i, j]``: the discrete exchange integral operator."""
        m = self.grid.weight * self.values * self.grid.riesz.weights
        m.setflags(write=False)
        return m

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0))

    def save(self, path):
        """Dense text dump with a one-line header ``n mu L``."""
        g = self.grid
        header = f"n={g.n} mu={g.mu} L={g.spec.half_width}"
        np.savetxt(path, self.values, header=header)


def _same_grid(*objs):
    grid = objs[0].grid
    for o in objs[1:]:
        if o.grid is not grid and o.grid.spec != grid.spec:
            raise GridMismatch("objects live on different grids")
    return grid


def laplacian_matrix(grid: Grid) -> np.ndarray:
    """Negative discrete Laplacian with zero Dirichlet data outside the node set."""
    n, h = grid.n, grid.h
    a1 = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    if grid.dimension == 1:
        return a1
    eye = np.eye(n)
    return np.kron(a1, eye) + np.kron(eye, a1)


@dataclass(frozen=True, eq=False)
class HartreeProblem:
    """Confining potential plus the coefficient of the repulsive Hartree term."""

    potential: Potential
    gamma: float = 1.0

    @property
    def grid(self):
        return self.potential.grid

    @cached_property
    def laplacian(self):
        a = laplacian_matrix(self.grid)
        a.setflags(write=False)
        return a

    @cached_property
    def base_matrix(self):
        """``-Delta + V`` as a dense matrix."""
        a = self.laplacian + np.diag(self.potential.values)
        a.setflags(write=False)
        return a

    def operator(self, rho: Kernel) -> OperatorMatrix:
        return assemble_operator(rho, self.potential, laplacian=self.laplacian)

    def w_norm2(self, u):
        """``<(-Delta + V) u, u>``, the squared energy-space norm."""
        u = self.grid.check(u)
        return float(self.grid.weight * u @ (self.base_matrix @ u))

    def pde_residual_vector(self, lam, rho_bar, u):
        """``L[rho_bar] u + gamma w_H(u) u - lam u`` at every node."""
        u = self.grid.check(u)
        _same_grid(rho_bar, self.potential)
        lu = self.base_matrix @ u - rho_bar.exchange_matrix @ u
        return lu + self.gamma * hartree_potential(self.grid, u) * u - lam * u

    def pde_residual(self, lam, rho_bar, u):
        return self.grid.l2_norm(self.pde_residual_vector(lam, rho_bar, u))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense symmetric matrix of ``-Delta + V - S[rho]`` with its parts kept apart."""

    grid: Grid
    laplacian: np.ndarray
    potential: np.ndarray
    exchange: np.ndarray

    @cached_property
    def matrix(self):
        a = self.laplacian + np.diag(self.potential) - self.exchange
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        return a

    def apply(self, u):
        return self.matrix @ self.grid.check(u)

    def shifted(self, diagonal):
        """New operator with ``diag(diagonal)`` added to the potential part."""
        return OperatorMatrix(self.grid, self.laplacian, self.potential + diagonal, self.exchange)


def assemble_operator(rho: Kernel, potential: Potential, laplacian=None) -> OperatorMatrix:
    grid = _same_grid(rho, potential)
    if laplacian is None:
        laplacian = laplacian_matrix(grid)
    return OperatorMatrix(grid, laplacian, np.array(potential.values), rho.exchange_matrix)


def operator_from_matrix(grid: Grid, matrix) -> OperatorMatrix:
    """Wrap an arbitrary symmetric matrix, mostly for testing the eigensolver."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (grid.size, grid.size):
        raise GridMismatch(f"matrix shape {matrix.shape} does not match grid size {grid.size}")
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-12 * max(1.0, np.abs(matrix).max())):
        raise InvalidGrid("operator matrix must be symmetric")
    zeros = np.zeros_like(matrix)
    return OperatorMatrix(grid, matrix, np.zeros(grid.size), zeros)


def exchange_apply(rho: Kernel, u) -> np.ndarray:
    """``(S[rho] u)_i = w sum_j rho_ij R_ij u_j``."""
    return rho.exchange_matrix @ rho.grid.check(u, "wave function")


def hartree_potential(grid: Grid, u) -> np.ndarray:
    """``w_H(u)_i = w sum_j R_ij u_j^2``; the Hartree term of the PDE is ``gamma w_H u``."""
    u = grid.check(u, "wave function")
    return grid.weight * (grid.riesz.weights @ (u * u))


def lmu_norm2(rho: Kernel) -> float:
    """Squared weighted norm ``w^2 sum_ij rho_ij^2 R_ij``."""
    g = rho.grid
    return float(g.weight**2 * np.sum(rho.values**2 * g.riesz.weights))


def lmu_inner(a: Kernel, b: Kernel) -> float:
    g = _same_grid(a, b)
    return float(g.weight**2 * np.sum(a.values * b.values * g.riesz.weights))


def lmu_dist2(a: Kernel, b: Kernel) -> float:
    g = _same_grid(a, b)
    return float(g.weight**2 * np.sum((a.values - b.values) ** 2 * g.riesz.weights))
