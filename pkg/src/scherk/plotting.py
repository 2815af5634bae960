"""Figures for reports, drawn with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_catenoid_profile(profile, path, s_max: float = 3.0) -> Path:
    """phi and psi of the unit catenoid against s."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        s = np.linspace(-s_max, s_max, 400)
        ax.plot(s, profile.phi(s), label=r"$\varphi$")
        ax.plot(s, profile.psi(s), label=r"$\psi$")
        ax.axhline(profile.c_inf, ls=":", c="gray", lw=0.8)
        ax.axhline(-profile.c_inf, ls=":", c="gray", lw=0.8)
        ax.set_xlabel("s")
        ax.set_title(f"unit {profile.n}-catenoid")
        ax.legend()
        return _save(fig, path)


def plot_neck_modes(neck, path, count: int = 4) -> Path:
    """Leading mode coefficients of the neck perturbation w against s."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        w = neck.w
        for j in range(min(count, w.coeffs.shape[0])):
            ax.plot(w.s, w.coeffs[j], label=f"mode {j}")
        ax.set_xlabel("s")
        ax.set_ylabel("w_j(s)")
        ax.set_title(f"neck perturbation, eps = {neck.eps:g}")
        ax.legend()
        return _save(fig, path)


def plot_outer_slice(surface, path) -> Path:
    """Upper-sheet height over the (r1, y1) slice of the outer domain."""
    grid = surface.outer.u.grid
    sl = (slice(None), slice(None)) + (0,) * (surface.m - 1)
    Z = surface.outer_height()[sl]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        im = ax.pcolormesh(grid.r, grid.y[0], Z.T, shading="auto", cmap="viridis")
        fig.colorbar(im, ax=ax, label="z")
        ax.set_aspect("equal")
        ax.set_xlabel(r"$|x_1|$")
        ax.set_ylabel(r"$y_1$")
        ax.set_title(f"outer graph, eps = {surface.eps:g}")
        return _save(fig, path)


def plot_convergence(histories: dict, path, title: str = "fixed point iteration") -> Path:
    """Semilog plot of named iteration histories."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, h in histories.items():
            h = np.asarray(h, dtype=float)
            if h.size:
                ax.semilogy(np.arange(1, h.size + 1), np.maximum(h, 1e-300), marker=".", label=name)
        ax.set_xlabel("iteration")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_slope_trend(eps, ratios, path, target: float = 0.5) -> Path:
    """c_eps / eps^(n-1) against eps with the limiting value."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(eps, ratios, "o-", label=r"$c_\varepsilon/\varepsilon^{n-1}$")
        ax.axhline(target, ls="--", c="gray", lw=0.8, label=f"limit {target:g}")
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_xlim(left=0)
        ax.legend()
        return _save(fig, path)


def plot_scaling(x, y, path, xlabel: str, ylabel: str, slope: float | None = None) -> Path:
    """Log-log plot with an optional reference power law through the last point."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(x, y, "o-", label="measured")
        if slope is not None:
            ax.loglog(x, y[-1] * (x / x[-1]) ** slope, "--", c="gray", label=f"slope {slope:g}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend()
        return _save(fig, path)


def plot_mesh(mesh, path, title: str = "", vertical_scale: float = 1.0) -> Path:
    """Shaded 3D view of a triangle mesh, heights multiplied by ``vertical_scale``."""
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(5, 4.5))
        ax = fig.add_subplot(projection="3d")
        V = mesh.vertices * np.array([1.0, 1.0, vertical_scale])
        ax.plot_trisurf(V[:, 0], V[:, 1], V[:, 2], triangles=mesh.faces, cmap="viridis",
                        linewidth=0.0, antialiased=True)
        span = np.ptp(V, axis=0)
        ax.set_box_aspect(np.maximum(span, 1e-3 * span.max()))
        ax.set_xlabel("x1")
        ax.set_ylabel("y1")
        ax.set_zlabel("z" if vertical_scale == 1.0 else f"z x {vertical_scale:g}")
        if title:
            ax.set_title(title)
        return _save(fig, path)
