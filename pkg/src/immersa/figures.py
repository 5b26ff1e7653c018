"""File-rendered figures accompanying the delimited reports.

Everything draws through the Agg backend straight to disk; nothing opens a
window.  Each helper returns the output path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, out):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return out


def geometry_maps(geom, out):
    """Heatmaps of the density, scalar mean curvature and smallest singular value."""
    hnorm = np.sqrt((geom.H**2).sum(axis=-1))
    from . import _kernels as K

    sv = np.sqrt(K.min_singular_value_sq(np, geom.g, geom.det))
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    for ax, (data, title) in zip(
        axes,
        [(geom.rho, "volume density"), (hnorm, "|H|"), (sv, "min singular value")],
    ):
        im = ax.imshow(data.T, origin="lower", extent=[0, 2 * np.pi, 0, 2 * np.pi])
        ax.set_title(title)
        ax.set_xlabel("u")
        ax.set_ylabel("v")
        fig.colorbar(im, ax=ax, shrink=0.85)
    return _finish(fig, out)


def surface_mesh(f, out):
    """Wireframe of a 3D immersion; higher ambient dimensions are skipped."""
    if f.d != 3:
        return None
    from mpl_toolkits.mplot3d import Axes3D  # noqa: F401

    p = f.positions
    closed = np.concatenate([p, p[:1]], axis=0)
    closed = np.concatenate([closed, closed[:, :1]], axis=1)
    fig = plt.figure(figsize=(5, 4.5))
    ax = fig.add_subplot(projection="3d")
    ax.plot_wireframe(
        closed[..., 0], closed[..., 1], closed[..., 2], linewidth=0.4, color="tab:blue"
    )
    ax.set_box_aspect((1, 1, 0.6))
    ax.set_axis_off()
    return _finish(fig, out)


def descent_curve(history, out):
    """Energy and gradient sup-norm over solver iterations."""
    its = [h[0] for h in history]
    energies = [h[1] for h in history]
    grads = [max(h[2], 1e-300) for h in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(its, energies, color="tab:blue")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("energy")
    ax2.semilogy(its, grads, color="tab:orange")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("gradient sup-norm")
    fig.suptitle("solver descent")
    return _finish(fig, out)


def step_diagnostics(rows, out):
    """Per-time-step diagnostics of a path."""
    steps = [r["step"] for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    panels = [
        ("energy_density", "energy density"),
        ("bg_ratio", "background/weighted ratio"),
        ("min_rho", "min volume density"),
        ("min_sv", "min singular value"),
    ]
    for ax, (key, title) in zip(axes.ravel(), panels):
        ax.plot(steps, [r[key] for r in rows], marker="o", ms=3)
        ax.set_title(title)
        ax.set_xlabel("time step")
    fig.tight_layout()
    return _finish(fig, out)


def ratio_overview(reports, out):
    """Max ratio per inequality and grid size, one group per surface."""
    fig, ax = plt.subplots(figsize=(8, 3.6))
    labels, values = [], []
    for rep in reports:
        for n in rep.grid_sizes:
            labels.append(f"{rep.inequality_id}\n{rep.surface_id} n={n}")
            values.append(rep.per_size[n]["max"])
    xs = np.arange(len(labels))
    ax.bar(xs, values, color="tab:green")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, fontsize=6, rotation=45, ha="right")
    ax.set_ylabel("max sampled ratio")
    ax.set_yscale("log")
    return _finish(fig, out)


def seq_profiles(path_arr, out):
    """Per-coordinate geodesic profiles of a sequence-space path."""
    arr = np.asarray(path_arr)
    taus = np.linspace(0, 1, arr.shape[0])
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    for i in range(arr.shape[1]):
        ax.plot(taus, arr[:, i], label=f"coordinate {i}")
    ax.set_xlabel("time")
    ax.set_ylabel("value")
    ax.legend(fontsize=7)
    return _finish(fig, out)
