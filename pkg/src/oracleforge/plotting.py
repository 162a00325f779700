"""Matplotlib figures for reports (headless Agg backend)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# metadata pinned so repeated renders are byte-identical
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kw = {"metadata": _SVG_META} if path.suffix == ".svg" else {}
    if path.suffix == ".svg":
        matplotlib.rcParams["svg.hashsalt"] = "oracleforge"
    fig.savefig(path, **kw)
    plt.close(fig)
    return path


def plot_lda_histogram(projection, path, labels: Sequence[str] | None = None) -> Path:
    """Density histograms of both classes along the discriminant direction."""
    names = labels or [str(c) for c in projection.classes]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    edges = projection.edges
    if len(edges) > 1 and edges[-1] > edges[0]:
        widths = edges[1:] - edges[:-1]
        ax.bar(edges[:-1], projection.hist0, width=widths, align="edge", alpha=0.5, label=names[0])
        ax.bar(edges[:-1], projection.hist1, width=widths, align="edge", alpha=0.5, label=names[1])
    ax.set_xlabel("projection onto discriminant")
    ax.set_ylabel("density")
    ax.set_title(f"class overlap {projection.overlap:.3f}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_localization_curve(curve: Sequence[tuple[float, float]], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ks = [k for k, _ in curve]
    ax.plot(ks, [v for _, v in curve], marker="o")
    ax.set_xlabel("attention threshold k (%)")
    ax.set_ylabel("pairs with buggy statement attended (%)")
    ax.set_ylim(0, 105)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_training_curves(reports, path) -> Path:
    """One panel per phase with train and validation loss per epoch."""
    reports = list(reports)
    fig, axes = plt.subplots(1, len(reports), figsize=(5 * len(reports), 3.5), squeeze=False)
    for ax, r in zip(axes[0], reports):
        epochs = range(1, len(r.val_losses) + 1)
        ax.plot(epochs, r.train_losses, label="train")
        ax.plot(epochs, r.val_losses, label="validation")
        if r.best_epoch:
            ax.axvline(r.best_epoch, color="gray", linestyle=":", label="best")
        ax.set_title(f"phase {r.phase} ({r.stop_reason})")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)
