"""Ground-truth drifting targets: Lagrangian advection with optional Brownian
error, and per-step Bernoulli detection consistent with the sensing sink."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .grid import OPEN, FlowSeries, Grid2D, ScalarField, interpolate_cells
from .sensing import Sensor, rates_at

ALIVE = 0
DETECTED = 1
ESCAPED = 2
STATUS_NAMES = {ALIVE: "alive", DETECTED: "detected", ESCAPED: "escaped"}


class TargetParticle(NamedTuple):
    y: tuple[float, float]
    status: int
    t_event: float


@dataclass
class TargetSet:
    """Column store for ``n`` targets; ``t_event`` is NaN until detection or escape."""

    y: np.ndarray
    status: np.ndarray
    t_event: np.ndarray

    @classmethod
    def at(cls, positions) -> "TargetSet":
        y = np.asarray(positions, dtype=float).reshape(-1, 2).copy()
        return cls(y, np.zeros(len(y), dtype=np.int8), np.full(len(y), np.nan))

    def __len__(self) -> int:
        return len(self.status)

    def copy(self) -> "TargetSet":
        return TargetSet(self.y.copy(), self.status.copy(), self.t_event.copy())

    def __getitem__(self, k: int) -> TargetParticle:
        return TargetParticle((float(self.y[k, 0]), float(self.y[k, 1])), int(self.status[k]), float(self.t_event[k]))

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.status == code)) for code, name in STATUS_NAMES.items()}


@dataclass
class DriftNoise:
    """Per-axis Gaussian position error added once per advection call."""

    sigma: float = 0.0
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        self.rng = np.random.default_rng(self.seed)


def spawn_targets(m0: ScalarField, n: int, seed) -> TargetSet:
    """Draw ``n`` positions from the cell masses of ``m0`` with uniform in-cell jitter."""
    if n <= 0:
        raise ValueError(f"target count must be positive, got {n}")
    grid = m0.grid
    weights = np.where(grid.fluid, np.clip(m0.values, 0.0, None), 0.0).ravel()
    total = weights.sum()
    if total <= 0:
        raise ValueError("initial distribution has no mass")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(weights / total)
    cells = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    cells = np.minimum(cells, len(cdf) - 1)
    j, i = np.divmod(cells, grid.nx)
    jitter = rng.random((n, 2))
    x = grid.origin[0] + (i + jitter[:, 0]) * grid.h
    y = grid.origin[1] + (j + jitter[:, 1]) * grid.h
    return TargetSet.at(np.column_stack([x, y]))


def _velocity(flow: FlowSeries, pts: np.ndarray, t: float) -> np.ndarray:
    grid = flow.grid
    x0, y0, x1, y1 = grid.bounds
    q = np.column_stack([np.clip(pts[:, 0], x0, x1), np.clip(pts[:, 1], y0, y1)])
    vx, vy = interpolate_cells(grid, flow.at(t), q, renormalize=False)
    return np.column_stack([vx, vy])


def _resolve_moves(grid: Grid2D, old: np.ndarray, new: np.ndarray):
    """Apply rim and obstacle rules to proposed moves.

    Returns the accepted positions and a mask of targets that left through an
    OPEN edge.  Moves through a WALL edge are clamped onto it; moves into an
    OBSTACLE cell keep whichever axis-aligned component stays in FLUID.
    """
    x0, y0, x1, y1 = grid.bounds
    eps = 1e-9 * grid.h
    e = grid.edges
    escaped = np.zeros(len(new), dtype=bool)
    for axis, lo, hi, lo_edge, hi_edge in ((0, x0, x1, "west", "east"), (1, y0, y1, "south", "north")):
        below = new[:, axis] < lo
        above = new[:, axis] > hi
        if e[lo_edge] == OPEN:
            escaped |= below
        if e[hi_edge] == OPEN:
            escaped |= above
        new[:, axis] = np.clip(new[:, axis], lo + eps, hi - eps)
    blocked = ~escaped & ~grid.is_fluid_at(new)
    if blocked.any():
        b = np.flatnonzero(blocked)
        slide_x = np.column_stack([new[b, 0], old[b, 1]])
        slide_y = np.column_stack([old[b, 0], new[b, 1]])
        ok_x = grid.is_fluid_at(slide_x)
        ok_y = grid.is_fluid_at(slide_y)
        new[b] = np.where(ok_x[:, None], slide_x, np.where(ok_y[:, None], slide_y, old[b]))
    return new, escaped


def advect_targets(
    targets: TargetSet,
    flow: FlowSeries,
    t: float,
    dt: float,
    noise: DriftNoise | None = None,
    substeps: int = 1,
) -> TargetSet:
    """Midpoint-rule advection over ``dt`` followed by the drift-noise kick.

    Detected targets keep drifting so trajectories stay identical across runs
    that share a flow and seed; escaped targets are frozen at the exit point.
    The noise draw always covers all ``n`` targets to keep streams aligned.
    """
    out = targets.copy()
    grid = flow.grid
    moving = out.status != ESCAPED
    sub = dt / substeps
    for k in range(substeps):
        ts = t + k * sub
        y = out.y[moving]
        k1 = _velocity(flow, y, ts)
        k2 = _velocity(flow, y + 0.5 * sub * k1, ts + 0.5 * sub)
        new, esc = _resolve_moves(grid, y, y + sub * k2)
        out.y[moving] = new
        idx = np.flatnonzero(moving)[esc]
        out.status[idx] = ESCAPED
        out.t_event[idx] = ts + sub
        moving = out.status != ESCAPED
    if noise is not None and noise.sigma > 0:
        kick = noise.rng.normal(0.0, noise.sigma, size=(len(out), 2))
        y = out.y[moving]
        new, esc = _resolve_moves(grid, y, y + kick[moving])
        out.y[moving] = new
        idx = np.flatnonzero(moving)[esc]
        out.status[idx] = ESCAPED
        out.t_event[idx] = t + dt
    return out


def detection_trials(
    targets: TargetSet,
    agents: Iterable[Sensor],
    dt: float,
    rng: np.random.Generator,
    t: float = float("nan"),
) -> TargetSet:
    """Detect each ALIVE target with probability ``1 - exp(-rate * dt)``.

    The rate is the summed footprint rate at the target's exact position.
    One uniform is drawn per target regardless of status.
    """
    out = targets.copy()
    draws = rng.random(len(out))
    alive = np.flatnonzero(out.status == ALIVE)
    if len(alive) == 0:
        return out
    rate = rates_at(list(agents), out.y[alive])
    p = -np.expm1(-rate * dt)
    hit = alive[draws[alive] < p]
    out.status[hit] = DETECTED
    out.t_event[hit] = t
    return out
