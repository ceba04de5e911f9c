"""Quick-look figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def metrics_figure(records, path, title: str | None = None) -> Path:
    """eta and kappa against time (eta of the transported field dashed, if it differs)."""
    t = np.array([r.t for r in records])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, [r.eta for r in records], label="eta")
    ax.plot(t, [r.kappa for r in records], label="kappa")
    eta_true = np.array([r.eta_true for r in records])
    if not np.allclose(eta_true, [r.eta for r in records]):
        ax.plot(t, eta_true, "--", label="eta (transported m)")
    ax.set_xlabel("t [s]")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def field_figure(values: np.ndarray, path, extent=None, mask: np.ndarray | None = None, title: str | None = None) -> Path:
    """False-color raster of a cell field; masked cells are left blank."""
    vals = np.asarray(values, dtype=float)
    if mask is not None:
        vals = np.ma.masked_where(~mask, vals)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(vals, origin="lower", extent=extent, cmap="magma", interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def sweep_figure(rows: list[dict], path) -> Path:
    """kappa (solid) and eta (dashed) against the velocity ratio, one color per horizon."""
    horizons = sorted({r["T"] for r in rows})
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8), sharey=True)
    for ax, mode in zip(axes, ("dynamic", "static")):
        for T, color in zip(horizons, plt.cm.viridis(np.linspace(0, 0.85, len(horizons)))):
            sel = sorted((r for r in rows if r["mode"] == mode and r["T"] == T), key=lambda r: r["lambda"])
            lam = [r["lambda"] for r in sel]
            ax.plot(lam, [r["kappa"] for r in sel], "-o", color=color, ms=3, label=f"kappa T={T:g}")
            ax.plot(lam, [r["eta"] for r in sel], "--", color=color, label=f"eta T={T:g}")
        ax.set_xscale("log")
        ax.set_xlabel("lambda")
        ax.set_title(mode)
        ax.grid(alpha=0.3, which="both")
    axes[0].set_ylim(0, 1.02)
    axes[1].legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
