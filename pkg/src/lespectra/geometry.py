"""Uniform grids on intervals and rectangles, and node-sampled fields."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box with ``n[a]`` interior nodes per axis.

    Nodes are stored in C order over the full ``(n[0]+2, ..., )`` lattice,
    boundary nodes included; axis 0 varies slowest.
    """

    extents: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.n) or len(self.n) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        for (a, b), k in zip(self.extents, self.n):
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ValueError(f"degenerate extent [{a}, {b}]")
            if k < 3:
                raise ValueError(f"need at least 3 interior nodes per axis, got {k}")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / (k + 1) for (a, b), k in zip(self.extents, self.n))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(k + 2 for k in self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.extents)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(a, b, k + 2) for (a, b), k in zip(self.extents, self.n))

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        mask = mask.ravel()
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior(self) -> np.ndarray:
        idx = np.flatnonzero(~self.boundary_mask)
        idx.setflags(write=False)
        return idx

    @cached_property
    def boundary(self) -> np.ndarray:
        idx = np.flatnonzero(self.boundary_mask)
        idx.setflags(write=False)
        return idx

    def multi_index(self, node: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(node, self.shape))

    def node_at(self, *ijk: int) -> int:
        return int(np.ravel_multi_index(ijk, self.shape))

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights over all nodes; they sum to the box volume."""
        w = np.ones(1)
        for hk, k in zip(self.h, self.n):
            wa = np.full(k + 2, hk)
            wa[0] = wa[-1] = hk / 2
            w = np.multiply.outer(w, wa)
        return w.ravel()

    def distance_profile(self) -> np.ndarray:
        """Product over axes of the distances to both faces; zero on the boundary."""
        out = np.ones(self.size)
        for ax, (a, b) in enumerate(self.extents):
            x = self.points[:, ax]
            out *= (x - a) * (b - x)
        return out


def make_uniform_grid(extents: Sequence[Sequence[float]] | Sequence[float], n: int | Sequence[int]) -> Grid:
    """Build a uniform grid; a bare ``(a, b)`` pair means an interval."""
    ext = np.asarray(extents, dtype=float)
    if ext.ndim == 1:
        ext = ext[None, :]
    if ext.ndim != 2 or ext.shape[1] != 2:
        raise ValueError("extents must be (a, b) or a list of (a, b) pairs")
    nn = (int(n),) * len(ext) if np.isscalar(n) else tuple(int(k) for k in n)
    return Grid(tuple((float(a), float(b)) for a, b in ext), nn)


@dataclass(frozen=True, eq=False)
class Field:
    """Real values on every node of ``grid`` (boundary nodes included)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid) -> Field:
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> Field:
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> Field:
        """Sample ``fn(*coords)`` at every node."""
        pts = grid.points
        return cls(grid, np.broadcast_to(fn(*pts.T), (grid.size,)))

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior]

    @property
    def on_boundary(self) -> np.ndarray:
        return self.values[self.grid.boundary]

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def _check(self, other: Field) -> None:
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")

    def _wrap(self, other, op):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, op(self.values, other.values))
        return Field(self.grid, op(self.values, float(other)))

    def __add__(self, other):
        return self._wrap(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(other, np.subtract)

    def __rsub__(self, other):
        return self._wrap(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._wrap(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(other, np.divide)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def allclose(self, other: Field, atol: float = 0.0, rtol: float = 0.0) -> bool:
        self._check(other)
        return bool(np.allclose(self.values, other.values, atol=atol, rtol=rtol))

    def __eq__(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        self._check(other)
        return bool(np.array_equal(self.values, other.values))

    __hash__ = None


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def lp_norm(f: Field, p: float) -> float:
    """Discrete L^p norm with trapezoid weights."""
    w = f.grid.quadrature_weights()
    return float(np.sum(w * np.abs(f.values) ** p) ** (1.0 / p))


def inward_normal(grid: Grid, node: int) -> tuple[int, ...]:
    """Lattice step pointing into the box from a boundary node.

    Corners get the diagonal step.
    """
    if not grid.boundary_mask[node]:
        raise ValueError(f"node {node} is not on the boundary")
    idx = grid.multi_index(node)
    step = []
    for i, k in zip(idx, grid.shape):
        step.append(1 if i == 0 else -1 if i == k - 1 else 0)
    return tuple(step)


def inward_boundary_derivative(f: Field, node: int) -> float:
    """One-sided difference quotient along the inward normal at a boundary node."""
    grid = f.grid
    step = inward_normal(grid, node)
    idx = grid.multi_index(node)
    nbr = grid.node_at(*(i + s for i, s in zip(idx, step)))
    dist = float(np.sqrt(sum((s * hk) ** 2 for s, hk in zip(step, grid.h))))
    return float((f.values[nbr] - f.values[node]) / dist)


def hopf_quotients(f: Field) -> np.ndarray:
    """Inward derivative at every boundary node, in boundary-index order."""
    return np.array([inward_boundary_derivative(f, int(b)) for b in f.grid.boundary])


def write_field_csv(f: Field, path, name: str = "value") -> None:
    labels = ["x", "y"][: f.grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*labels, name])
        for pt, val in zip(f.grid.points, f.values):
            w.writerow([*(format(c, ".17g") for c in pt), format(val, ".17g")])


def read_field_csv(path, grid: Grid) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.size, grid.dim + 1):
        raise ValueError(f"CSV shape {data.shape} does not match grid")
    if not np.allclose(data[:, : grid.dim], grid.points, atol=1e-12):
        raise GridMismatchError("CSV coordinates do not match grid nodes")
    return Field(grid, data[:, -1])
