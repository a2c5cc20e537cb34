"""Truncated uniform grids, confining potentials and the Riesz weight table."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfinementSuspect, FloorViolated, GridMismatch, InvalidGrid, InvalidMu

MIN_POINTS = 16


@dataclass(frozen=True)
class GridSpec:
    dimension: int = 1
    half_width: float = 12.0
    points_per_axis: int = 401
    mu: float = 0.5

    def validate(self):
        if self.dimension not in (1, 2):
            raise InvalidGrid(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.half_width > 0:
            raise InvalidGrid(f"half_width must be positive, got {self.half_width}")
        if self.points_per_axis < MIN_POINTS:
            raise InvalidGrid(
                f"points_per_axis must be >= {MIN_POINTS}, got {self.points_per_axis}"
            )
        upper = min(self.dimension, 4)
        if not 0.0 < self.mu < upper:
            raise InvalidMu(f"mu must lie in the open interval (0, {upper}), got {self.mu}")


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid on [-L, L]^N with rectangle-rule weight ``h**N``.

    Nodes are flattened in C order; ``points`` has shape ``(size, N)``.
    """

    spec: GridSpec
    axis: np.ndarray
    points: np.ndarray

    @property
    def dimension(self):
        return self.spec.dimension

    @property
    def mu(self):
        return self.spec.mu

    @property
    def n(self):
        return self.spec.points_per_axis

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def h(self):
        return 2.0 * self.spec.half_width / (self.n - 1)

    @property
    def weight(self):
        return self.h ** self.dimension

    @cached_property
    def radius(self):
        return np.sqrt(np.sum(self.points**2, axis=1))

    @cached_property
    def boundary_mask(self):
        idx = np.indices((self.n,) * self.dimension).reshape(self.dimension, -1)
        return np.any((idx == 0) | (idx == self.n - 1), axis=0)

    @cached_property
    def riesz(self) -> RieszTable:
        return build_riesz(self)

    def check(self, values, what="array"):
        """Raise GridMismatch unless ``values`` has one entry per node."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise GridMismatch(f"{what} has shape {values.shape}, grid has {self.size} nodes")
        return values

    def l2_norm(self, u):
        u = self.check(u, "wave function")
        return float(np.sqrt(self.weight * np.dot(u, u)))

    def inner(self, u, v):
        return float(self.weight * np.dot(self.check(u), self.check(v)))


def uniform_axis(half_width, n):
    """Nodes ``-L + i h``, ``i = 0..n-1``, with ``h = 2L / (n - 1)``; no size floor."""
    if n < 2 or not half_width > 0:
        raise InvalidGrid(f"need n >= 2 and L > 0, got n={n}, L={half_width}")
    h = 2.0 * half_width / (n - 1)
    axis = -half_width + h * np.arange(n)
    axis[-1] = half_width
    return axis


def build_grid(spec: GridSpec) -> Grid:
    spec.validate()
    axis = uniform_axis(spec.half_width, spec.points_per_axis)
    if spec.dimension == 1:
        points = axis[:, None]
    else:
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        points = np.column_stack([xx.ravel(), yy.ravel()])
    return Grid(spec=spec, axis=axis, points=points)


@dataclass(frozen=True, eq=False)
class Potential:
    grid: Grid
    values: np.ndarray
    floor: float
    preset: str = "table"


def build_potential(grid: Grid, preset="harmonic_plus", c=1.0, file=None, strict=False) -> Potential:
    """Evaluate a confining potential on the grid.

    Presets: ``harmonic_plus`` gives ``|x|^2 + c``, ``quartic`` gives
    ``|x|^4 + c``, ``table`` reads ``file`` (two columns: node index, value).
    """
    r = grid.radius
    if preset == "harmonic_plus":
        values = r**2 + c
    elif preset == "quartic":
        values = r**4 + c
    elif preset == "table":
        if file is None:
            raise InvalidGrid("table potential requires a file")
        values = load_potential_table(grid, file)
    elif callable(preset):
        values = np.asarray(preset(grid.points), dtype=float).reshape(grid.size)
        preset = getattr(preset, "__name__", "callable")
    else:
        raise InvalidGrid(f"unknown potential preset {preset!r}")
    return potential_from_values(grid, values, preset=str(preset), strict=strict)


def potential_from_values(grid, values, preset="table", strict=False) -> Potential:
    values = grid.check(values, "potential").copy()
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        bad = int(np.argmin(values))
        raise FloorViolated(f"potential must be positive at every node; V[{bad}] = {values[bad]}")
    center = values[int(np.argmin(grid.radius))]
    edge_min = values[grid.boundary_mask].min()
    if edge_min < center:
        msg = f"boundary value {edge_min} is below the centre value {center}; V may not confine"
        if strict:
            raise ConfinementSuspect(msg)
        warnings.warn(msg, stacklevel=3)
    values.setflags(write=False)
    return Potential(grid=grid, values=values, floor=float(values.min()), preset=preset)


def load_potential_table(grid, path) -> np.ndarray:
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != 2 or data.shape[0] != grid.size:
        raise GridMismatch(
            f"potential table {path} has shape {data.shape}, expected ({grid.size}, 2)"
        )
    index = data[:, 0].astype(int)
    if not np.array_equal(np.sort(index), np.arange(grid.size)):
        raise GridMismatch(f"potential table {path} must list every node index exactly once")
    values = np.empty(grid.size)
    values[index] = data[:, 1]
    return values


@dataclass(frozen=True, eq=False)
class RieszTable:
    weights: np.ndarray
    diagonal_rule: str
    diagonal_value: float = field(default=0.0)


def riesz_diagonal(h, mu, dimension=1):
    """Cell average of ``|s|^-mu`` over the cell around a node.

    In 1D this is the exact mean over ``[-h/2, h/2]``; in 2D it is the mean over
    the disc with the same area as the square cell.
    """
    if dimension == 1:
        return (h / 2.0) ** (-mu) / (1.0 - mu)
    r = h / np.sqrt(np.pi)
    return 2.0 * r ** (-mu) / (2.0 - mu)


def build_riesz(grid: Grid) -> RieszTable:
    diff = grid.points[:, None, :] - grid.points[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    diag = riesz_diagonal(grid.h, grid.mu, grid.dimension)
    np.fill_diagonal(dist, 1.0)
    weights = dist ** (-grid.mu)
    np.fill_diagonal(weights, diag)
    weights = 0.5 * (weights + weights.T)
    weights.setflags(write=False)
    rule = "interval-mean" if grid.dimension == 1 else "equal-area-disc-mean"
    return RieszTable(weights=weights, diagonal_rule=rule, diagonal_value=float(diag))
