"""Transport of the undetected-target probability field.

Advection and diffusion are integrated with explicit finite-volume substeps
(first-order upwind fluxes, two-point diffusive fluxes); the sensing sink is
applied separately as an exact exponential decay.
"""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass

import numpy as np

from .grid import OPEN, FlowSeries, Grid2D, ScalarField

log = logging.getLogger(__name__)

ADVECTIVE_CFL = 0.9
DIFFUSIVE_CFL = 0.2
MAX_SUBSTEPS = 1 << 20


class TransportError(RuntimeError):
    """Non-finite input or an unattainable stability bound."""


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class TransportConfig:
    D: float = 0.0
    n_substeps: int = 10

    def __post_init__(self):
        if not self.D >= 0:
            raise ValueError(f"diffusion coefficient must be >= 0, got {self.D}")
        if self.n_substeps < 1:
            raise ValueError(f"n_substeps must be >= 1, got {self.n_substeps}")


def normalize(m: ScalarField) -> ScalarField:
    """Scale ``m`` so it integrates to one over the FLUID cells."""
    values = np.where(m.grid.fluid, m.values, 0.0)
    total = values.sum() * m.grid.cell_area
    if not np.isfinite(total) or total <= 0:
        raise NormalizationError(f"cannot normalize a field with total mass {total}")
    return ScalarField(m.grid, values / total)


def diffusion_coefficient(e: float, t: float) -> float:
    """Diffusion coefficient from a drift error ``e`` reached after time ``t``: e^2 / (2 t)."""
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    if e < 0:
        raise ValueError(f"drift error must be >= 0, got {e}")
    return e * e / (2.0 * t)


def apply_sensing(m: ScalarField, gamma, dt: float) -> ScalarField:
    """Exact solution of dm/dt = -gamma m over ``dt``."""
    g = gamma.values if isinstance(gamma, ScalarField) else np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("coverage rate must be non-negative")
    return ScalarField(m.grid, m.values * np.exp(-g * dt))


class _Faces:
    """Face-normal velocities and diffusive conductances for one flow.

    ``ux[k]`` has shape (ny, nx + 1): x-faces of snapshot ``k`` from west rim
    to east rim.  ``uy[k]`` has shape (ny + 1, nx).  Faces touching a masked
    cell or a WALL rim carry zero velocity; OPEN rim faces keep outflow only.
    """

    def __init__(self, flow: FlowSeries):
        grid = flow.grid
        self.grid = grid
        self.times = flow.times
        fl = grid.fluid
        fx_inner = fl[:, 1:] & fl[:, :-1]
        fy_inner = fl[1:, :] & fl[:-1, :]
        self.cx = np.zeros((grid.ny, grid.nx + 1))
        self.cx[:, 1:-1] = fx_inner
        self.cy = np.zeros((grid.ny + 1, grid.nx))
        self.cy[1:-1, :] = fy_inner
        ux = np.zeros((len(flow.times), grid.ny, grid.nx + 1))
        uy = np.zeros((len(flow.times), grid.ny + 1, grid.nx))
        ux[:, :, 1:-1] = 0.5 * (flow.wx[:, :, 1:] + flow.wx[:, :, :-1]) * fx_inner
        uy[:, 1:-1, :] = 0.5 * (flow.wy[:, 1:, :] + flow.wy[:, :-1, :]) * fy_inner
        if grid.edges["west"] == OPEN:
            ux[:, :, 0] = np.minimum(flow.wx[:, :, 0], 0.0) * fl[:, 0]
        if grid.edges["east"] == OPEN:
            ux[:, :, -1] = np.maximum(flow.wx[:, :, -1], 0.0) * fl[:, -1]
        if grid.edges["south"] == OPEN:
            uy[:, 0, :] = np.minimum(flow.wy[:, 0, :], 0.0) * fl[0, :]
        if grid.edges["north"] == OPEN:
            uy[:, -1, :] = np.maximum(flow.wy[:, -1, :], 0.0) * fl[-1, :]
        self.ux, self.uy = ux, uy
        # per-cell outflow speed, an upper bound over any time interpolation
        out = (
            np.maximum(ux[:, :, 1:], 0) - np.minimum(ux[:, :, :-1], 0)
            + np.maximum(uy[:, 1:, :], 0) - np.minimum(uy[:, :-1, :], 0)
        )
        self.max_outflow = float(out.max())
        self.n_conductive = self.cx[:, 1:] + self.cx[:, :-1] + self.cy[1:, :] + self.cy[:-1, :]
        self.max_speed = float(np.sqrt(flow.wx**2 + flow.wy**2).max())

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        times = self.times
        if len(times) == 1 or t <= times[0]:
            return self.ux[0], self.uy[0]
        if t >= times[-1]:
            return self.ux[-1], self.uy[-1]
        k1 = int(np.searchsorted(times, t, side="right"))
        a = (t - times[k1 - 1]) / (times[k1] - times[k1 - 1])
        return (
            (1 - a) * self.ux[k1 - 1] + a * self.ux[k1],
            (1 - a) * self.uy[k1 - 1] + a * self.uy[k1],
        )


_face_cache: "weakref.WeakKeyDictionary[FlowSeries, _Faces]" = weakref.WeakKeyDictionary()


def _faces(flow: FlowSeries) -> _Faces:
    faces = _face_cache.get(flow)
    if faces is None:
        faces = _face_cache[flow] = _Faces(flow)
    return faces


def substep_count(flow: FlowSeries, cfg: TransportConfig, dt: float) -> int:
    """Smallest ``n_substeps * 2**k`` meeting the CFL and positivity bounds."""
    faces = _faces(flow)
    h = flow.grid.h
    diff_max = cfg.D * float(faces.n_conductive.max()) / (h * h)
    n = cfg.n_substeps
    while True:
        sub = dt / n
        ok = (
            faces.max_speed * sub / h <= ADVECTIVE_CFL
            and cfg.D * sub / (h * h) <= DIFFUSIVE_CFL
            and (faces.max_outflow / h + diff_max) * sub <= 1.0
        )
        if ok:
            return n
        n *= 2
        if n > MAX_SUBSTEPS:
            raise TransportError(f"no stable substep count up to {MAX_SUBSTEPS} for dt={dt}")


def step_transport(m: ScalarField, flow: FlowSeries, cfg: TransportConfig, t: float, dt: float) -> ScalarField:
    """Advance ``m`` by advection and diffusion from ``t`` to ``t + dt``."""
    grid: Grid2D = m.grid
    if flow.grid is not grid and flow.grid.shape != grid.shape:
        raise TransportError("flow and field live on different grids")
    values = np.where(grid.fluid, m.values, 0.0)
    if not np.all(np.isfinite(values)):
        raise TransportError("probability field contains NaN or Inf")
    if dt <= 0:
        return ScalarField(grid, values)
    faces = _faces(flow)
    n = substep_count(flow, cfg, dt)
    if n > cfg.n_substeps:
        log.debug("transport substeps raised from %d to %d", cfg.n_substeps, n)
    sub = dt / n
    h = grid.h
    kx = cfg.D / h * faces.cx
    ky = cfg.D / h * faces.cy
    diffuse = cfg.D > 0
    ny, nx = grid.shape
    px = np.zeros((ny, nx + 2))
    py = np.zeros((ny + 2, nx))
    ux, uy = faces.at(t)
    for k in range(n):
        if len(faces.times) > 1:
            ux, uy = faces.at(t + (k + 0.5) * sub)
        px[:, 1:-1] = values
        py[1:-1, :] = values
        left, right = px[:, :-1], px[:, 1:]
        below, above = py[:-1, :], py[1:, :]
        fx = np.maximum(ux, 0.0) * left + np.minimum(ux, 0.0) * right
        fy = np.maximum(uy, 0.0) * below + np.minimum(uy, 0.0) * above
        if diffuse:
            fx -= kx * (right - left)
            fy -= ky * (above - below)
        values = values - (sub / h) * (fx[:, 1:] - fx[:, :-1] + fy[1:, :] - fy[:-1, :])
    np.maximum(values, 0.0, out=values)
    return ScalarField(grid, values)
