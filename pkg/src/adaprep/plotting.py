"""Figures written to image files: metric bars, seen/unseen gaps, attention traces."""

from __future__ import annotations

from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import METRIC_NAMES  # noqa: E402
from .model import VARIANT_LABELS  # noqa: E402


def plot_metric_bars(report, path) -> None:
    splits = report.splits
    variants = report.variants
    fig, axes = plt.subplots(1, len(splits), figsize=(5 * len(splits), 3.5), squeeze=False)
    width = 0.8 / max(len(variants), 1)
    x = np.arange(len(METRIC_NAMES))
    for ax, split in zip(axes[0], splits):
        for i, v in enumerate(variants):
            m = report.results.get((split, v))
            if m is None:
                continue
            ax.bar(x + i * width, [getattr(m, k) for k in METRIC_NAMES], width, label=VARIANT_LABELS[v])
        ax.set_xticks(x + width * (len(variants) - 1) / 2, METRIC_NAMES)
        ax.set_ylim(0, 1)
        ax.set_title(split)
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_degradation(gaps: Dict[str, float], path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3))
    names = list(gaps)
    ax.bar([VARIANT_LABELS.get(v, v) for v in names], [gaps[v] for v in names])
    ax.axhline(0, color="k", lw=0.8)
    ax.set_ylabel("seen - unseen accuracy")
    ax.tick_params(axis="x", labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_attention(traces: Sequence[dict], path, max_clips: int = 6):
    """Attention weight vs frame index, one line per clip; returns the axes data."""
    fig, ax = plt.subplots(figsize=(6, 3))
    lines = []
    for t in traces[:max_clips]:
        (line,) = ax.plot(np.arange(len(t["weights"])), t["weights"], marker=".", label=t["clip_id"])
        lines.append(line.get_ydata())
        if "object_counts" in t:
            seen = np.flatnonzero(np.asarray(t["object_counts"]) > 0)
            ax.scatter(seen, np.asarray(t["weights"])[seen], s=25, facecolors="none",
                       edgecolors=line.get_color())
    ax.set_xlabel("frame")
    ax.set_ylabel("attention")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return lines
