"""Attraction potential: alpha * lap(u) - u + m = 0 with zero normal derivative
on every non-FLUID face, and the normalized gradient used for steering."""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid2D, ScalarField, _as_points, interpolate_cells

GRADIENT_FLOOR = 1e-12


class PotentialError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PotentialConfig:
    alpha: float
    tol: float = 1e-8
    max_iter: int = 5000
    direct_limit: int = 100_000

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.tol <= 1e-4:
            raise ValueError(f"tolerance must lie in (0, 1e-4], got {self.tol}")


def screened_poisson_matrix(grid: Grid2D, alpha: float) -> sp.csr_matrix:
    """``I - alpha * L`` over FLUID cells (row-major order of the FLUID subset).

    ``L`` is the 5-point Laplacian with Neumann ghost closure, so only
    FLUID-FLUID faces contribute.  The matrix is symmetric positive definite.
    """
    fl = grid.fluid
    index = -np.ones(grid.shape, dtype=np.int64)
    index[fl] = np.arange(int(fl.sum()))
    n = int(fl.sum())
    c = alpha / grid.h**2
    rows, cols = [], []
    for a, b in (
        (index[:, :-1], index[:, 1:]),
        (index[:-1, :], index[1:, :]),
    ):
        both = (a >= 0) & (b >= 0)
        rows.append(a[both])
        cols.append(b[both])
    r = np.concatenate(rows)
    q = np.concatenate(cols)
    deg = np.bincount(np.concatenate([r, q]), minlength=n).astype(float)
    off = np.full(len(r), -c)
    diag = np.arange(n)
    data = np.concatenate([1.0 + c * deg, off, off])
    ij = (np.concatenate([diag, r, q]), np.concatenate([diag, q, r]))
    return sp.coo_matrix((data, ij), shape=(n, n)).tocsr()


class _Solver:
    def __init__(self, grid: Grid2D, cfg: PotentialConfig):
        self.A = screened_poisson_matrix(grid, cfg.alpha)
        self.cfg = cfg
        n = self.A.shape[0]
        self.lu = spla.splu(self.A.tocsc(), permc_spec="MMD_AT_PLUS_A") if n <= cfg.direct_limit else None
        self.inv_diag = 1.0 / self.A.diagonal()

    def solve(self, rhs: np.ndarray, guess: np.ndarray | None) -> np.ndarray:
        cfg = self.cfg
        norm = np.linalg.norm(rhs)
        if norm == 0:
            return np.zeros_like(rhs)
        if self.lu is not None:
            x = self.lu.solve(rhs)
        else:
            M = spla.LinearOperator(self.A.shape, matvec=lambda v: self.inv_diag * v)
            x, _ = spla.cg(self.A, rhs, x0=guess, rtol=cfg.tol * 0.5, maxiter=cfg.max_iter, M=M)
        res = float(np.linalg.norm(self.A @ x - rhs) / norm)
        if not res <= cfg.tol:
            raise PotentialError("screened Poisson solve did not converge", res)
        return x


_solvers: "weakref.WeakKeyDictionary[Grid2D, dict]" = weakref.WeakKeyDictionary()


def _solver(grid: Grid2D, cfg: PotentialConfig) -> _Solver:
    per_grid = _solvers.setdefault(grid, {})
    if cfg not in per_grid:
        per_grid[cfg] = _Solver(grid, cfg)
    return per_grid[cfg]


def solve_potential(m: ScalarField, cfg: PotentialConfig, guess: ScalarField | None = None) -> ScalarField:
    """Potential sourced by ``m``; ``guess`` warm-starts the iterative path."""
    grid = m.grid
    fl = grid.fluid
    rhs = m.values[fl]
    if not np.all(np.isfinite(rhs)):
        raise PotentialError("source field is not finite", float("nan"))
    x0 = None if guess is None else guess.values[fl]
    x = _solver(grid, cfg).solve(rhs, x0)
    u = np.zeros(grid.shape)
    u[fl] = x
    return ScalarField(grid, u)


def gradient_field(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Cell-center gradient: central differences, one-sided next to masked cells."""
    grid = u.grid
    fl = grid.fluid
    vals = np.where(fl, u.values, 0.0)

    def along(v: np.ndarray, f: np.ndarray) -> np.ndarray:
        # derivative along axis 1; f is the fluid mask in the same layout
        left_ok = np.zeros_like(f)
        right_ok = np.zeros_like(f)
        left_ok[:, 1:] = f[:, :-1]
        right_ok[:, :-1] = f[:, 1:]
        vl = np.zeros_like(v)
        vr = np.zeros_like(v)
        vl[:, 1:] = v[:, :-1]
        vr[:, :-1] = v[:, 1:]
        g = np.zeros_like(v)
        both = left_ok & right_ok
        g[both] = (vr[both] - vl[both]) / (2 * grid.h)
        only_r = right_ok & ~left_ok
        g[only_r] = (vr[only_r] - v[only_r]) / grid.h
        only_l = left_ok & ~right_ok
        g[only_l] = (v[only_l] - vl[only_l]) / grid.h
        return np.where(f, g, 0.0)

    gx = along(vals, fl)
    gy = along(vals.T, fl.T).T
    return gx, gy


def unit_gradients(u: ScalarField, points, grad: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Unit gradient directions at many points; rows are NaN where there is no direction."""
    pts, _ = _as_points(u.grid, points)
    gx, gy = grad if grad is not None else gradient_field(u)
    vx, vy = interpolate_cells(u.grid, (gx, gy), pts, renormalize=True)
    norm = np.hypot(vx, vy)
    out = np.full((len(pts), 2), np.nan)
    ok = norm >= GRADIENT_FLOOR
    out[ok, 0] = vx[ok] / norm[ok]
    out[ok, 1] = vy[ok] / norm[ok]
    return out


def unit_gradient(u: ScalarField, p) -> np.ndarray | None:
    """Unit gradient of ``u`` at ``p``, or ``None`` when the gradient vanishes."""
    d = unit_gradients(u, np.asarray(p, dtype=float).reshape(1, 2))[0]
    return None if np.isnan(d[0]) else d
