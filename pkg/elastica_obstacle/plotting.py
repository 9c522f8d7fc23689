"""Static SVG figures rendered with matplotlib's Agg backend."""
import logging
import os
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed metadata keeps repeated runs byte-identical.
SVG_METADATA = {"Date": None}


def _save(fig: "plt.Figure", path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    matplotlib.rcParams["svg.hashsalt"] = "elastica-obstacle"
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_curve(curve: pd.DataFrame, path: str, title: Optional[str] = None) -> str:
    """The planar curve (X, Y) with equal aspect."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve["X"], curve["Y"], color="#1f77b4", linewidth=1.8)
    ax.set_aspect("equal")
    ax.set_xlabel("X")
    ax.set_ylabel("Y")
    ax.grid(True, alpha=0.25)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_profiles(x: np.ndarray, profiles: Dict[str, np.ndarray], path: str, title: str,
                  obstacles: Optional[Dict[str, np.ndarray]] = None) -> str:
    """Graphs over [0, 1], optionally with their obstacles dashed."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, values in profiles.items():
        ax.plot(x, values, linewidth=1.8, label=label)
    for label, values in (obstacles or {}).items():
        ax.plot(x, values, linewidth=1.0, linestyle="--", color="gray", alpha=0.7, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(title)
    ax.grid(True, alpha=0.25)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_table(frame: pd.DataFrame, x: str, columns: Sequence[str], path: str, title: str,
               logx: bool = False) -> str:
    """Line plot of selected columns of a table."""
    fig, ax = plt.subplots(figsize=(7, 4))
    finite = frame[np.isfinite(frame[x])]
    for column in columns:
        ax.plot(finite[x], finite[column], marker="o", markersize=2, linewidth=1.2, label=column)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.grid(True, alpha=0.25)
    ax.legend(fontsize=8)
    return _save(fig, path)
