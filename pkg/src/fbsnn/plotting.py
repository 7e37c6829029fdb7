"""Figures rendered from the emitted CSV files.

Nothing here runs during training; the functions only read CSVs written by
:mod:`fbsnn.cli` and save PNGs next to them.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from .io import read_metrics_csv

__all__ = ["plot_training_curves", "plot_mismatch_sweep"]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_training_curves(csv_paths, out_path, title: str | None = None) -> Path:
    """Validation accuracy, loss and target error against epoch or window.

    Several per-seed CSVs are drawn as a mean line with a one-sigma band.
    """
    plt = _pyplot()
    runs = [read_metrics_csv(p) for p in csv_paths]
    runs = [r for r in runs if r]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    for ax, key, label in zip(
        axes,
        ("accuracy", "val_loss", "target_error"),
        ("validation accuracy", "validation loss", "target error (spikes/step)"),
    ):
        length = min(len(r) for r in runs)
        x = np.array([runs[0][i]["index"] for i in range(length)])
        y = np.array([[r[i][key] for i in range(length)] for r in runs], dtype=float)
        mu, sd = y.mean(axis=0), y.std(axis=0)
        ax.plot(x, mu, color="tab:blue")
        if len(runs) > 1:
            ax.fill_between(x, mu - sd, mu + sd, color="tab:blue", alpha=0.25, lw=0)
        ax.set_xlabel("epoch / window")
        ax.set_ylabel(label)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_mismatch_sweep(csv_path, out_path) -> Path:
    """Test accuracy box plots against mismatch CV, one colour per population size."""
    plt = _pyplot()
    rows = [r for r in read_metrics_csv(csv_path) if r.get("status", "ok") == "ok"]
    cells = defaultdict(list)
    for r in rows:
        cells[(float(r["cv"]), int(r["p"]))].append(float(r["accuracy"]))
    cvs = sorted({k[0] for k in cells})
    ps = sorted({k[1] for k in cells})
    fig, ax = plt.subplots(figsize=(6, 3.6))
    width = 0.8 / max(len(ps), 1)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for j, p in enumerate(ps):
        data = [cells.get((cv, p), [np.nan]) for cv in cvs]
        pos = np.arange(len(cvs)) + (j - (len(ps) - 1) / 2) * width
        bp = ax.boxplot(data, positions=pos, widths=width * 0.9, patch_artist=True, manage_ticks=False)
        for box in bp["boxes"]:
            box.set_facecolor(colors[j % len(colors)])
            box.set_alpha(0.6)
        ax.plot([], [], color=colors[j % len(colors)], lw=6, alpha=0.6, label=f"p = {p}")
    ax.set_xticks(np.arange(len(cvs)))
    ax.set_xticklabels([f"{cv:g}" for cv in cvs])
    ax.set_xlabel("mismatch CV")
    ax.set_ylabel("test accuracy")
    ax.legend(frameon=False)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
