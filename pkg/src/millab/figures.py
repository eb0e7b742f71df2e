"""Matplotlib rendering of report figures (written to files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bags import Origin, UnpackedDataset

_ORIGIN_STYLE = {
    Origin.POS_BAG_POS: dict(color="tab:red", marker="^", label="positives (pos bags)"),
    Origin.POS_BAG_NEG: dict(color="tab:orange", marker="x", label="negatives (pos bags)"),
    Origin.NEG_BAG: dict(color="tab:blue", marker=".", label="negatives (neg bags)"),
}


def save_dataset_scatter(
    dataset: UnpackedDataset,
    path: str | Path,
    max_per_origin: int = 400,
    seed: int = 0,
) -> None:
    """Scatter a (subsampled) dataset by origin, color-coded."""
    rng = np.random.default_rng(seed)
    fig, ax = plt.subplots(figsize=(6, 5))
    for origin in Origin:
        mask = dataset.origin_mask(origin)
        pts = dataset.features[mask]
        if len(pts) > max_per_origin:
            pts = pts[rng.choice(len(pts), max_per_origin, replace=False)]
        if len(pts):
            ax.scatter(pts[:, 0], pts[:, 1], s=14, alpha=0.7, **_ORIGIN_STYLE[origin])
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_heatmap_figure(
    values: np.ndarray,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    path: str | Path,
    title: str = "",
) -> None:
    """Render a score grid (rows = y, ascending) as an image with colorbar."""
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(
        values,
        origin="lower",
        extent=(x_range[0], x_range[1], y_range[0], y_range[1]),
        vmin=0.0,
        vmax=1.0,
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label="score")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ap_bars(
    per_label: dict[str, list[float | None]],
    path: str | Path,
    title: str = "",
) -> None:
    """Grouped bar chart of per-label APs, one group of bars per objective."""
    names = list(per_label)
    n_labels = max(len(v) for v in per_label.values())
    x = np.arange(n_labels)
    width = 0.8 / max(1, len(names))
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * n_labels), 4))
    for k, name in enumerate(names):
        vals = [v if v is not None else 0.0 for v in per_label[name]]
        ax.bar(x + k * width, vals, width, label=name)
    ax.set_xticks(x + width * (len(names) - 1) / 2)
    ax.set_xticklabels([f"label {i}" for i in range(n_labels)])
    ax.set_ylabel("average precision")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_pr_curve_figure(
    recalls: np.ndarray, precisions: np.ndarray, path: str | Path, title: str = ""
) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.step(recalls, precisions, where="post")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
