"""Figures written next to the CLI's tabular output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PHASES = ("approximation", "folding", "expanding")


def _show(ax, image, bits, title):
    img = np.clip(np.asarray(image, dtype=float) / (2**bits - 1), 0, 1)
    if img.ndim == 2:
        ax.imshow(img, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    else:
        ax.imshow(img, interpolation="nearest")
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])


def plot_bench(rows, path):
    """Sparsity ratios (dictionary vs DCT) and per-phase timings for each image."""
    names = [r["image"] for r in rows]
    x = np.arange(len(rows))
    fig, (ax_sr, ax_t) = plt.subplots(1, 2, figsize=(11, 4))
    width = 0.38
    ax_sr.bar(x - width / 2, [r["sr_dictionary"] for r in rows], width, label="mixed dictionary")
    ax_sr.bar(x + width / 2, [r["sr_dct"] for r in rows], width, label="block DCT")
    ax_sr.set_ylabel("sparsity ratio")
    ax_sr.set_xticks(x, names, rotation=30, ha="right")
    ax_sr.legend(frameon=False)

    bottom = np.zeros(len(rows))
    for phase in PHASES:
        vals = np.array([r[f"t_{phase}"] for r in rows])
        ax_t.bar(x, vals, 0.6, bottom=bottom, label=phase)
        bottom += vals
    ax_t.set_ylabel("seconds")
    ax_t.set_xticks(x, names, rotation=30, ha="right")
    ax_t.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fold_panels(plain, folded, recovered, path, bits=8, title=None):
    """Plain-text approximation, folded container (16-bit words) and recovered image."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 4.5), gridspec_kw={"width_ratios": [1, 1, 1]})
    _show(axes[0], plain, bits, f"plain text {plain.shape[0]}x{plain.shape[1]}")
    _show(axes[1], folded, 16, f"folded {folded.shape[0]}x{folded.shape[1]}")
    _show(axes[2], recovered, bits, "recovered")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_approximation(original, approx, path, bits=8, title=None):
    fig, axes = plt.subplots(1, 3, figsize=(12, 4.5))
    _show(axes[0], original, bits, "original")
    _show(axes[1], approx, bits, "approximation")
    diff = np.abs(np.asarray(original, float) - np.asarray(approx, float))
    if diff.ndim == 3:
        diff = diff.mean(axis=2)
    im = axes[2].imshow(diff, cmap="magma", interpolation="nearest")
    axes[2].set_title("|difference|", fontsize=9)
    axes[2].set_xticks([])
    axes[2].set_yticks([])
    fig.colorbar(im, ax=axes[2], fraction=0.046)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
