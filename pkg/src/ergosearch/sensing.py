"""Sensing-rate footprints and the summed coverage rate field.

Footprints are expressed in agent-local coordinates whose +y axis points
along the agent heading and whose +x axis points across it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Union

import numpy as np

from .grid import Grid2D, ScalarField

RATE_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianDiskFootprint:
    """Radially decaying detection rate; ``r_d`` is carried as metadata only."""

    mu: float
    sigma: float
    r_d: float = 0.0

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"detection probability must lie in (0, 1), got {self.mu}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def peak_rate(self) -> float:
        return -math.log(1.0 - self.mu) / 2.0 * self.mu

    @property
    def reach(self) -> float:
        """Distance beyond which the rate drops under ``RATE_FLOOR``."""
        return self.sigma * math.sqrt(2.0 * max(math.log(self.peak_rate / RATE_FLOOR), 0.0))

    def rate_local(self, rx, ry):
        d2 = np.asarray(rx) ** 2 + np.asarray(ry) ** 2
        rate = self.peak_rate * np.exp(-0.5 * d2 / self.sigma**2)
        return np.where(rate < RATE_FLOOR, 0.0, rate)


@dataclass(frozen=True)
class RectFootprint:
    """Constant rate over a ``width`` (across heading) by ``height`` (along heading) box."""

    mu: float
    width: float
    height: float

    def __post_init__(self):
        if not 0 <= self.mu < 1:
            raise ValueError(f"detection probability must lie in [0, 1), got {self.mu}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("footprint width and height must be positive")

    @property
    def rate(self) -> float:
        return -math.log(1.0 - self.mu) / 9.0 * self.mu

    @property
    def reach(self) -> float:
        return 0.5 * math.hypot(self.width, self.height)

    def rate_local(self, rx, ry):
        inside = (np.abs(rx) <= 0.5 * self.width) & (np.abs(ry) <= 0.5 * self.height)
        return np.where(inside, self.rate, 0.0)


Footprint = Union[GaussianDiskFootprint, RectFootprint]


class Sensor(Protocol):
    z: np.ndarray
    theta: float
    active: bool
    footprint: Footprint


def gamma_gaussian(d, f: GaussianDiskFootprint):
    """Rate at distance ``d`` from the agent."""
    out = f.rate_local(np.asarray(d, dtype=float), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def gamma_rect(r_local, f: RectFootprint):
    """Rate at an agent-local point (x across heading, y along heading)."""
    r = np.asarray(r_local, dtype=float)
    out = f.rate_local(r[..., 0], r[..., 1])
    return float(out) if np.ndim(out) == 0 else out


def to_local(z, theta: float, x) -> np.ndarray:
    """Agent-local coordinates of world points ``x``: rotate ``z - x`` by ``pi/2 - theta``.

    The extra quarter turn puts the heading on the local +y axis.
    """
    d = np.asarray(z, dtype=float) - np.asarray(x, dtype=float)
    phi = 0.5 * math.pi - theta
    c, s = math.cos(phi), math.sin(phi)
    return np.stack([c * d[..., 0] - s * d[..., 1], s * d[..., 0] + c * d[..., 1]], axis=-1)


def rates_at(agents: Iterable[Sensor], points) -> np.ndarray:
    """Total sensing rate of the active agents at arbitrary world points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    total = np.zeros(len(pts))
    for a in agents:
        if not a.active:
            continue
        near = np.abs(pts - a.z).max(axis=1) <= a.footprint.reach
        if near.any():
            r = to_local(a.z, a.theta, pts[near])
            total[near] += a.footprint.rate_local(r[:, 0], r[:, 1])
    return total


def accumulate_coverage(agents: Iterable[Sensor], grid: Grid2D) -> ScalarField:
    """Coverage rate on the grid, sampled at cell centers of FLUID cells."""
    gamma = np.zeros(grid.shape)
    x0, y0 = grid.origin
    h = grid.h
    for a in agents:
        if not a.active:
            continue
        reach = a.footprint.reach
        i0 = max(int(math.floor((a.z[0] - reach - x0) / h)), 0)
        i1 = min(int(math.ceil((a.z[0] + reach - x0) / h)), grid.nx)
        j0 = max(int(math.floor((a.z[1] - reach - y0) / h)), 0)
        j1 = min(int(math.ceil((a.z[1] + reach - y0) / h)), grid.ny)
        if i0 >= i1 or j0 >= j1:
            continue
        X, Y = np.meshgrid(x0 + (np.arange(i0, i1) + 0.5) * h, y0 + (np.arange(j0, j1) + 0.5) * h)
        r = to_local(a.z, a.theta, np.stack([X, Y], axis=-1))
        gamma[j0:j1, i0:i1] += a.footprint.rate_local(r[..., 0], r[..., 1])
    gamma[~grid.fluid] = 0.0
    return ScalarField(grid, gamma)
