"""Figure rendering for evaluation reports.

Plots are written straight to files (Agg backend); the CLI calls these
when a plot directory is requested so batch runs leave a visual summary
next to the JSON/CSV output.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_score_histogram"]


def save_score_histogram(
    scores: Sequence[float],
    path: str,
    title: str,
    xlabel: str = "score",
    bins: int = 40,
) -> str:
    """Histogram of per-document scores; returns the written path."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if scores:
        ax.hist(scores, bins=bins, color="#4878a8", edgecolor="white")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("documents")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
