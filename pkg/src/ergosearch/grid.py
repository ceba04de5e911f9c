"""Masked uniform raster shared by every solver, plus off-lattice sampling.

Arrays are stored row-major with shape ``(ny, nx)``: row ``j`` is the y index,
column ``i`` the x index.  Cell ``(j, i)`` has its center at
``origin + ((i + 0.5) h, (j + 0.5) h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

FLUID = 0
OBSTACLE = 1

WALL = "wall"
OPEN = "open"
EDGE_NAMES = ("west", "east", "south", "north")


class DomainError(ValueError):
    """Invalid domain construction (degenerate bounds, no FLUID cells...)."""


class OutOfDomainError(ValueError):
    """A query point lies outside the grid bounds."""


def points_in_polygon(points: np.ndarray, polygon: Sequence[Sequence[float]]) -> np.ndarray:
    """Even-odd containment test, vectorized over ``points`` of shape (N, 2)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(polygon, dtype=float)
    if poly.ndim != 2 or poly.shape[0] < 3 or poly.shape[1] != 2:
        raise DomainError("polygon needs at least three (x, y) vertices")
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < x_cross)
        xj, yj = xi, yi
    return inside


@dataclass(frozen=True, eq=False)
class Grid2D:
    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    mask: np.ndarray
    edges: Mapping[str, str] = field(default_factory=lambda: dict.fromkeys(EDGE_NAMES, WALL))

    def __post_init__(self):
        if self.h <= 0 or not math.isfinite(self.h):
            raise DomainError(f"cell size must be positive, got {self.h}")
        if self.nx < 2 or self.ny < 2:
            raise DomainError(f"grid needs at least 2x2 cells, got {self.nx}x{self.ny}")
        mask = np.ascontiguousarray(self.mask, dtype=np.uint8)
        if mask.shape != (self.ny, self.nx):
            raise DomainError(f"mask shape {mask.shape} != ({self.ny}, {self.nx})")
        if not np.any(mask == FLUID):
            raise DomainError("domain has no FLUID cells")
        edges = dict.fromkeys(EDGE_NAMES, WALL)
        edges.update(self.edges or {})
        for name, policy in edges.items():
            if name not in EDGE_NAMES or policy not in (WALL, OPEN):
                raise DomainError(f"bad edge policy {name}={policy}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        fluid = mask == FLUID
        fluid.setflags(write=False)
        object.__setattr__(self, "fluid", fluid)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, y0, x0 + self.nx * self.h, y0 + self.ny * self.h)

    @property
    def xc(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.h

    @property
    def yc(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.h

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as two ``(ny, nx)`` arrays."""
        return np.meshgrid(self.xc, self.yc)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        x0, y0, x1, y1 = self.bounds
        return (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)

    def cell_index(self, points) -> tuple[np.ndarray, np.ndarray]:
        """(j, i) of the cell holding each point; points on the far rim map inward."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        i = np.floor((pts[:, 0] - self.origin[0]) / self.h).astype(np.int64)
        j = np.floor((pts[:, 1] - self.origin[1]) / self.h).astype(np.int64)
        return np.clip(j, 0, self.ny - 1), np.clip(i, 0, self.nx - 1)

    def is_fluid_at(self, points) -> np.ndarray:
        """True where a point is inside the bounds and its cell is FLUID."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        j, i = self.cell_index(pts)
        return self.contains(pts) & self.fluid[j, i]


def build_grid(
    bounds: Sequence[float],
    h: float,
    obstacles: Sequence[Sequence[Sequence[float]]] = (),
    edges: Mapping[str, str] | None = None,
) -> Grid2D:
    """Rasterize a rectangle with polygonal obstacles by cell-center containment.

    ``bounds`` is ``(xmin, ymin, xmax, ymax)``.  Cell counts are
    ``ceil(extent / h)`` per axis.
    """
    xmin, ymin, xmax, ymax = map(float, bounds)
    if not (xmax > xmin and ymax > ymin):
        raise DomainError(f"degenerate bounds {bounds}")
    if not h > 0:
        raise DomainError(f"cell size must be positive, got {h}")
    # the small slack keeps 1.0 / 0.01 from rounding up to 101 cells
    nx = max(1, math.ceil((xmax - xmin) / h - 1e-9))
    ny = max(1, math.ceil((ymax - ymin) / h - 1e-9))
    mask = np.zeros((ny, nx), dtype=np.uint8)
    if obstacles:
        xc = xmin + (np.arange(nx) + 0.5) * h
        yc = ymin + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xc, yc)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        for poly in obstacles:
            mask.ravel()[points_in_polygon(pts, poly)] = OBSTACLE
    return Grid2D((xmin, ymin), float(h), nx, ny, mask, dict(edges or {}))


@dataclass
class ScalarField:
    """Cell-centered values; entries on OBSTACLE cells are ignored (kept at 0)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def integral(self) -> float:
        """Sum of values times cell area over FLUID cells."""
        return float(self.values[self.grid.fluid].sum() * self.grid.cell_area)


@dataclass(frozen=True, eq=False)
class FlowSeries:
    """Time-indexed cell-centered velocity snapshots, ``wx``/``wy`` of shape (k, ny, nx)."""

    grid: Grid2D
    times: np.ndarray
    wx: np.ndarray
    wy: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        wx = np.asarray(self.wx, dtype=float).reshape(len(times), *self.grid.shape).copy()
        wy = np.asarray(self.wy, dtype=float).reshape(len(times), *self.grid.shape).copy()
        if len(times) < 1:
            raise ValueError("flow needs at least one snapshot")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        if not (np.all(np.isfinite(wx)) and np.all(np.isfinite(wy))):
            raise ValueError("flow contains non-finite values")
        wx[:, ~self.grid.fluid] = 0.0
        wy[:, ~self.grid.fluid] = 0.0
        for a in (times, wx, wy):
            a.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "wx", wx)
        object.__setattr__(self, "wy", wy)

    @classmethod
    def steady(cls, grid: Grid2D, wx, wy) -> "FlowSeries":
        return cls(grid, np.array([0.0]), np.asarray(wx)[None], np.asarray(wy)[None])

    @property
    def is_steady(self) -> bool:
        return len(self.times) == 1

    def bracket(self, t: float) -> tuple[int, int, float]:
        """Indices of the snapshots around ``t`` and the weight of the later one."""
        times = self.times
        if t <= times[0]:
            return 0, 0, 0.0
        if t >= times[-1]:
            k = len(times) - 1
            return k, k, 0.0
        k1 = int(np.searchsorted(times, t, side="right"))
        k0 = k1 - 1
        return k0, k1, float((t - times[k0]) / (times[k1] - times[k0]))

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        k0, k1, a = self.bracket(t)
        if a == 0.0:
            return self.wx[k0], self.wy[k0]
        return (1 - a) * self.wx[k0] + a * self.wx[k1], (1 - a) * self.wy[k0] + a * self.wy[k1]


def _bilinear_stencil(grid: Grid2D, pts: np.ndarray):
    fx = (pts[:, 0] - grid.origin[0]) / grid.h - 0.5
    fy = (pts[:, 1] - grid.origin[1]) / grid.h - 0.5
    i0 = np.minimum(np.maximum(np.floor(fx), 0), grid.nx - 2).astype(np.int64)
    j0 = np.minimum(np.maximum(np.floor(fy), 0), grid.ny - 2).astype(np.int64)
    # constant extrapolation in the half-cell band along the rim
    tx = np.minimum(np.maximum(fx - i0, 0.0), 1.0)
    ty = np.minimum(np.maximum(fy - j0, 0.0), 1.0)
    weights = np.array([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty])
    jj = np.array([j0, j0, j0 + 1, j0 + 1])
    ii = np.array([i0, i0 + 1, i0, i0 + 1])
    return jj, ii, weights


def _as_points(grid: Grid2D, p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    pts = arr.reshape(-1, 2)
    if not np.all(grid.contains(pts)):
        bad = pts[~grid.contains(pts)][0]
        raise OutOfDomainError(f"point {tuple(bad)} outside bounds {grid.bounds}")
    return pts, single


def interpolate_cells(grid: Grid2D, values, pts: np.ndarray, renormalize: bool):
    """Bilinear interpolation of cell values at in-bounds points (no bounds check).

    ``values`` may be one (ny, nx) array or a tuple of them sharing the stencil.
    With ``renormalize`` the weights are rescaled over FLUID neighbours only;
    otherwise masked neighbours simply contribute zero.
    """
    jj, ii, w = _bilinear_stencil(grid, pts)
    fluid = grid.fluid[jj, ii]
    many = isinstance(values, tuple)
    arrays = values if many else (values,)
    if renormalize:
        w = w * fluid
        total = w.sum(axis=0)
        safe = np.where(total > 0, total, 1.0)
        outs = tuple(np.where(total > 0, np.sum(w * v[jj, ii], axis=0) / safe, 0.0) for v in arrays)
    else:
        w = w * fluid
        outs = tuple(np.sum(w * v[jj, ii], axis=0) for v in arrays)
    return outs if many else outs[0]


def sample_vector(flow: FlowSeries, p, t: float):
    """Velocity at point(s) ``p`` and time ``t``: bilinear in space, linear in time."""
    pts, single = _as_points(flow.grid, p)
    wx, wy = flow.at(t)
    vx, vy = interpolate_cells(flow.grid, (wx, wy), pts, renormalize=False)
    out = np.column_stack([vx, vy])
    return out[0] if single else out


def sample_scalar(f: ScalarField, p):
    """Field value at point(s) ``p`` with weights renormalized over FLUID cells."""
    pts, single = _as_points(f.grid, p)
    out = interpolate_cells(f.grid, f.values, pts, renormalize=True)
    return float(out[0]) if single else out
