"""Figure rendering for batch runs.

Every report figure lands next to the delimited output in the run
directory.  The Agg backend is forced so batch runs never need a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import ScalarField  # noqa: E402
from .observables import TimeSeries  # noqa: E402
from .sensitivity import PARAM_NAMES, SobolResult  # noqa: E402


def plot_timeseries(series: dict[str, TimeSeries], out_dir: str | Path,
                    stem: str = "timeseries") -> list[Path]:
    """One linear plot per observable plus a log-log energy plot."""
    out_dir = Path(out_dir)
    paths = []
    for name, s in series.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(s.times, s.values, lw=1.5)
        ax.set_xlabel("time")
        ax.set_ylabel(name)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        p = out_dir / f"{stem}_{name}.png"
        fig.savefig(p, dpi=130)
        plt.close(fig)
        paths.append(p)
    if "energy" in series:
        s = series["energy"]
        pos = (s.times > 0) & (s.values > 0)
        if pos.sum() >= 3:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.loglog(s.times[pos], s.values[pos], lw=1.5)
            ax.set_xlabel("time")
            ax.set_ylabel("energy")
            ax.grid(alpha=0.3, which="both")
            fig.tight_layout()
            p = out_dir / f"{stem}_energy_loglog.png"
            fig.savefig(p, dpi=130)
            plt.close(fig)
            paths.append(p)
    return paths


def plot_field(field: ScalarField, out_dir: str | Path,
               name: str) -> Path | None:
    """Line plot (1D) or pseudocolor image (2D); 3D fields are skipped."""
    out_dir = Path(out_dir)
    g = field.grid
    if g.dim == 3:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    if g.dim == 1:
        x = g.node_coords()[:, 0]
        ax.plot(x, field.values, lw=1.5)
        ax.set_xlabel("x")
        ax.set_ylabel(name)
    else:
        nx, ny = g.nodes_per_axis
        img = field.values.reshape(ny, nx)
        (x0, x1), (y0, y1) = g.domain
        im = ax.imshow(img, origin="lower", extent=(x0, x1, y0, y1),
                       cmap="RdBu_r")
        fig.colorbar(im, ax=ax, label=name)
    ax.set_title(name)
    fig.tight_layout()
    p = out_dir / f"field_{name}.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    return p


def plot_sensitivity(result: SobolResult, out_dir: str | Path) -> Path:
    """Bar chart of the averaged first-order indices."""
    out_dir = Path(out_dir)
    labels = [r"$\alpha$", "M", r"$\lambda$", r"$\delta$", r"$C_\Psi$",
              r"$\varepsilon$", r"$\chi$", "D"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(len(PARAM_NAMES)), result.indices, color="tab:blue")
    ax.set_xticks(np.arange(len(PARAM_NAMES)))
    ax.set_xticklabels(labels)
    ax.set_ylabel("first-order Sobol index")
    ax.set_title(f"N = {result.n_samples}, QoI: {result.qoi_description}")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    p = out_dir / "sensitivity_indices.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    return p


def plot_convergence(dt_values, errors: dict, out_dir: str | Path) -> Path:
    """Log-log error-vs-dt plot, one line per (alpha, power) case."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, errs in errors.items():
        ax.loglog(dt_values, errs, marker="o", label=label)
    ax.set_xlabel(r"$\Delta t$")
    ax.set_ylabel("error at t = 1")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    p = out_dir / "convergence.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    return p
