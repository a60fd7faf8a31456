"""Optional matplotlib renderings of CLI outputs (Agg backend, files only)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def rd_figure(deltas, rates, path, unit="nats", d_crit=None):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    order = np.argsort(deltas)
    d, r = np.asarray(deltas)[order], np.asarray(rates)[order]
    ax.plot(d, r, color="black", lw=1.5)
    top = float(np.max(r[np.isfinite(r)])) if np.any(np.isfinite(r)) else 1.0
    ax.fill_between(d, r, top * 1.05, color="0.85")
    if d_crit is not None:
        ax.axvline(d_crit, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("distortion")
    ax.set_ylabel(f"rate [{unit}]")
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def series_figure(columns, path):
    """Semi-log plot of every positive column against n."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    n = np.asarray(columns["n"])
    for name, vals in columns.items():
        if name in ("n", "min_density"):
            continue
        vals = np.asarray(vals, dtype=float)
        keep = vals > 0
        if keep.any():
            ax.semilogy(n[keep], vals[keep], marker=".", lw=1, label=name)
    ax.set_xlabel("n")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
