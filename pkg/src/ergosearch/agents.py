"""Constant-speed Dubins agents: steering toward a direction, exact arc
integration, and a forward-simulation avoidance filter."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import Grid2D
from .sensing import Footprint

log = logging.getLogger(__name__)

CANDIDATE_FRACTIONS = (1.0, -1.0, 0.75, -0.75, 0.5, -0.5, 0.25, -0.25, 0.0)


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    w = math.pi - np.mod(math.pi - np.asarray(a, dtype=float), 2 * math.pi)
    w = np.where(w <= -math.pi, w + 2 * math.pi, w)
    return float(w) if w.ndim == 0 else w


@dataclass
class AgentState:
    z: np.ndarray
    theta: float
    v: float
    omega_max: float
    delta: float
    footprint: Footprint | None = None
    active: bool = True
    ident: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float).reshape(2)
        self.theta = float(wrap_angle(self.theta))
        if not self.omega_max > 0:
            raise ValueError(f"omega_max must be positive, got {self.omega_max}")

    @classmethod
    def with_turn_radius(cls, z, theta, v, r_min, delta, footprint=None, **kw) -> "AgentState":
        return cls(z, theta, v, v / r_min, delta, footprint, **kw)

    @property
    def turn_radius(self) -> float:
        return self.v / self.omega_max


def desired_turn_rate(a: AgentState, direction, dt: float) -> float:
    """Turn rate that removes the heading error within ``dt``, clamped to the limit.

    ``direction`` of ``None`` (or NaN) means there is nowhere to go: hold heading.
    """
    if direction is None or not np.all(np.isfinite(direction)):
        return 0.0
    err = wrap_angle(math.atan2(direction[1], direction[0]) - a.theta)
    return float(np.clip(err / dt, -a.omega_max, a.omega_max))


def arc_points(z, theta: float, v: float, omegas, times) -> np.ndarray:
    """Positions along constant-turn-rate arcs, shape (len(omegas), len(times), 2)."""
    w = np.asarray(omegas, dtype=float)[:, None]
    t = np.asarray(times, dtype=float)[None, :]
    straight = np.abs(w) < 1e-12
    safe_w = np.where(straight, 1.0, w)
    phase = theta + w * t
    dx = np.where(straight, v * t * math.cos(theta), v / safe_w * (np.sin(phase) - math.sin(theta)))
    dy = np.where(straight, v * t * math.sin(theta), v / safe_w * (math.cos(theta) - np.cos(phase)))
    return np.stack([z[0] + dx, z[1] + dy], axis=-1)


def step_agent(a: AgentState, omega: float, dt: float) -> AgentState:
    """Exact integration of the Dubins kinematics under a constant turn rate."""
    if not a.active:
        return a
    if abs(omega) > a.omega_max + 1e-12:
        raise ValueError(f"turn rate {omega} exceeds limit {a.omega_max}")
    z = arc_points(a.z, a.theta, a.v, [omega], [dt])[0, 0]
    return replace(a, z=z, theta=float(wrap_angle(a.theta + omega * dt)))


@dataclass
class AvoidanceResult:
    omegas: list[float]
    feasible: list[bool]
    horizon: float
    adjusted: list[bool] = field(default_factory=list)


def avoidance_horizon(a: AgentState, dt: float) -> float:
    return max(2.0 * a.delta / a.v, 3.0 * dt)


def _sample_times(a: AgentState, grid: Grid2D, horizon: float) -> np.ndarray:
    spacing = min(grid.h, a.delta) / 8.0
    k = max(int(math.ceil(a.v * horizon / spacing)), 3)
    return np.linspace(0.0, horizon, k + 1)[1:]


def avoid_report(agents: Sequence[AgentState], proposals: Sequence[float], grid: Grid2D, dt: float) -> AvoidanceResult:
    """Approve or replace each proposed turn rate, in ascending agent order.

    Each active agent's constant-rate arc over the horizon is checked against
    the grid (bounds and obstacles) and against the arcs already committed by
    lower-index agents.  An infeasible proposal is swapped for the closest
    feasible candidate; with no feasible candidate the agent turns hard away
    from the nearest threat.
    """
    horizon = max((avoidance_horizon(a, dt) for a in agents if a.active), default=3.0 * dt)
    out = [float(p) for p in proposals]
    feasible = [True] * len(agents)
    adjusted = [False] * len(agents)
    committed: list[tuple[np.ndarray, float]] = []
    times = None
    for idx, a in enumerate(agents):
        if not a.active:
            continue
        if times is None:
            times = _sample_times(a, grid, horizon)
        prop = float(np.clip(out[idx], -a.omega_max, a.omega_max))
        cands = np.array([prop] + [f * a.omega_max for f in CANDIDATE_FRACTIONS])
        paths = arc_points(a.z, a.theta, a.v, cands, times)
        flat = paths.reshape(-1, 2)
        ok = grid.is_fluid_at(flat).reshape(paths.shape[:2]).all(axis=1)
        for other, d_min in committed:
            sep = np.linalg.norm(paths - other[None], axis=-1).min(axis=1)
            ok &= sep >= d_min
        if ok[0]:
            out[idx] = prop
        elif ok[1:].any():
            choices = np.flatnonzero(ok[1:]) + 1
            best = choices[np.argmin(np.abs(cands[choices] - prop))]
            out[idx] = float(cands[best])
            adjusted[idx] = True
        else:
            out[idx] = _turn_away(a, paths[0], grid, committed)
            feasible[idx] = False
            adjusted[idx] = True
            log.info("agent %d: no feasible turn-rate candidate", a.ident)
        chosen = arc_points(a.z, a.theta, a.v, [out[idx]], times)[0]
        committed.append((chosen, a.delta))
    return AvoidanceResult(out, feasible, horizon, adjusted)


def _turn_away(a: AgentState, path: np.ndarray, grid: Grid2D, committed) -> float:
    threats = []
    bad = ~grid.is_fluid_at(path)
    if bad.any():
        threats.append(path[np.argmax(bad)])
    for other, _ in committed:
        threats.append(other[0])
    if not threats:
        return a.omega_max
    threats = np.asarray(threats)
    nearest = threats[np.argmin(np.linalg.norm(threats - a.z, axis=1))]
    dx, dy = nearest - a.z
    left = math.cos(a.theta) * dy - math.sin(a.theta) * dx > 0
    return -a.omega_max if left else a.omega_max


def avoid(agents: Sequence[AgentState], proposals: Sequence[float], grid: Grid2D, dt: float) -> list[float]:
    return avoid_report(agents, proposals, grid, dt).omegas
