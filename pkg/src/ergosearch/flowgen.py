"""Synthetic flows standing in for CFD output."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .grid import OPEN, WALL, FlowSeries, Grid2D
from .metrics import mean_speed


def _stream_velocity(grid: Grid2D, psi: np.ndarray, walls: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Cell-center velocity from a cell-center stream function by central differences.

    Ghost values beyond a WALL rim are the reflection of the first row about
    the wall's stream value (``walls[edge]``, default 0), which makes the
    averaged wall-face velocity exactly zero; beyond an OPEN rim the ghost is
    a linear extrapolation.
    """
    walls = walls or {}
    ny, nx = psi.shape
    p = np.zeros((ny + 2, nx + 2))
    p[1:-1, 1:-1] = psi
    e = grid.edges

    def ghost(edge, first, second):
        if e[edge] == WALL:
            return 2 * walls.get(edge, 0.0) - first
        return 2 * first - second

    p[1:-1, 0] = ghost("west", psi[:, 0], psi[:, 1])
    p[1:-1, -1] = ghost("east", psi[:, -1], psi[:, -2])
    p[0, 1:-1] = ghost("south", psi[0, :], psi[1, :])
    p[-1, 1:-1] = ghost("north", psi[-1, :], psi[-2, :])
    wx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * grid.h)
    wy = -(p[1:-1, 2:] - p[1:-1, :-2]) / (2 * grid.h)
    return wx, wy


def _fit_obstacles(grid: Grid2D, psi: np.ndarray, blend: float | None = None) -> np.ndarray:
    """Make every obstacle a streamline of ``psi``.

    Each connected obstacle, plus a two-cell halo, gets a constant stream
    value (the obstacle's mean); the original field returns smoothly over
    ``blend`` (default 5 cells) beyond the halo.  Central differences then
    give zero velocity on every obstacle face, so the flux-form divergence
    stays zero after the transport solver closes those faces.
    """
    solid = ~grid.fluid
    if not solid.any():
        return psi
    labels, n = ndimage.label(solid)
    means = ndimage.mean(psi, labels, index=np.arange(1, n + 1))
    dist, (jj, ii) = ndimage.distance_transform_edt(~solid, return_indices=True)
    const = means[labels[jj, ii] - 1]
    blend = 5.0 if blend is None else blend / grid.h
    s = np.clip((dist - 2.0) / blend, 0.0, 1.0)
    chi = s * s * (3 - 2 * s)
    return const + (psi - const) * chi


def _rescale(grid: Grid2D, wx: np.ndarray, wy: np.ndarray, times, target: float) -> FlowSeries:
    flow = FlowSeries(grid, np.asarray(times, dtype=float), wx, wy)
    current = mean_speed(flow)
    if current == 0:
        raise ValueError("generated flow is identically zero on FLUID cells")
    s = target / current
    return FlowSeries(grid, flow.times, flow.wx * s, flow.wy * s)


def cavity_like_flow(grid: Grid2D, mean_speed: float) -> FlowSeries:
    """Steady single-vortex recirculation from psi = sin^2(pi x/Lx) sin^2(pi y/Ly).

    Obstacles are turned into streamlines so the flow goes around them; the
    amplitude is set so the FLUID-mean speed equals ``mean_speed``.
    """
    x0, y0, x1, y1 = grid.bounds
    X, Y = grid.centers()
    psi = np.sin(math.pi * (X - x0) / (x1 - x0)) ** 2 * np.sin(math.pi * (Y - y0) / (y1 - y0)) ** 2
    wx, wy = _stream_velocity(grid, _fit_obstacles(grid, psi))
    return _rescale(grid, wx[None], wy[None], [0.0], mean_speed)


def channel_flow(
    grid: Grid2D,
    mean_speed: float,
    period: float = 44640.0,
    duration: float = 21600.0,
    n_snapshots: int = 13,
    eddy: float = 0.6,
) -> FlowSeries:
    """Transient channel flow: a west-to-east jet with a tidal pulse plus a slowly
    rotating recirculation cell, sampled at ``n_snapshots`` evenly spaced times.

    The jet speed follows 0.5 + 0.5 cos(2 pi t / period) in relative terms so
    the along-channel drift slows and picks up again over a tidal cycle.
    Islands are streamlines of both components.
    """
    x0, y0, x1, y1 = grid.bounds
    X, Y = grid.centers()
    Lx, Ly = x1 - x0, y1 - y0
    sy = (Y - y0) / Ly
    # jet: u = sin^2(pi y / Ly), psi = integral of u dy
    psi_jet = Ly * (sy / 2.0 - np.sin(2 * math.pi * sy) / (4 * math.pi))
    psi_eddy = (Ly / math.pi) * np.sin(math.pi * (X - x0) / Lx) ** 2 * np.sin(math.pi * sy) ** 2
    jx, jy = _stream_velocity(grid, _fit_obstacles(grid, psi_jet), walls={"north": Ly / 2.0})
    ex, ey = _stream_velocity(grid, _fit_obstacles(grid, psi_eddy))
    times = np.linspace(0.0, duration, n_snapshots)
    a = 0.5 + 0.5 * np.cos(2 * math.pi * times / period)
    b = eddy * np.sin(2 * math.pi * times / period)
    wx = a[:, None, None] * jx[None] + b[:, None, None] * ex[None]
    wy = a[:, None, None] * jy[None] + b[:, None, None] * ey[None]
    return _rescale(grid, wx, wy, times, mean_speed)


def uniform_flow(grid: Grid2D, wx: float, wy: float) -> FlowSeries:
    return FlowSeries.steady(grid, np.full(grid.shape, wx), np.full(grid.shape, wy))


def scale_flow(flow: FlowSeries, s: float) -> FlowSeries:
    """Every velocity multiplied by ``s`` (structure unchanged)."""
    if not s > 0:
        raise ValueError(f"scale factor must be positive, got {s}")
    if s == 1:
        return flow
    return FlowSeries(flow.grid, flow.times, flow.wx * s, flow.wy * s)


def discrete_divergence(flow: FlowSeries, k: int = 0) -> np.ndarray:
    """Flux-form divergence with face velocities averaged from adjacent centers.

    Rim faces take the transport solver's convention: zero on WALL edges,
    the boundary cell's own velocity on OPEN edges.
    """
    grid = flow.grid
    wx, wy = flow.wx[k], flow.wy[k]
    ny, nx = grid.shape
    fx = np.zeros((ny, nx + 1))
    fy = np.zeros((ny + 1, nx))
    fx[:, 1:-1] = 0.5 * (wx[:, 1:] + wx[:, :-1])
    fy[1:-1, :] = 0.5 * (wy[1:, :] + wy[:-1, :])
    if grid.edges["west"] == OPEN:
        fx[:, 0] = wx[:, 0]
    if grid.edges["east"] == OPEN:
        fx[:, -1] = wx[:, -1]
    if grid.edges["south"] == OPEN:
        fy[0, :] = wy[0, :]
    if grid.edges["north"] == OPEN:
        fy[-1, :] = wy[-1, :]
    return (fx[:, 1:] - fx[:, :-1] + fy[1:, :] - fy[:-1, :]) / grid.h
