"""Figures written next to the CSV outputs.

Uses :class:`matplotlib.figure.Figure` directly so nothing depends on the
pyplot state machine or an interactive backend.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from ..loop import EpisodeRecord

PANELS = (
    ("r_n_x", "normalized x-direction"),
    ("r_n_y", "normalized y-direction"),
    ("phi_n", "normalized orientation"),
    ("pixel_error", "pixel error [px]"),
    ("position_error_mm", "position error [mm]"),
    ("orientation_error_deg", "orientation error [deg]"),
)


def plot_episode(record: EpisodeRecord, path, title: str = "", thresholds=(1.0, 1.0)) -> Path:
    """Six-panel progression of one episode: commands on top, errors below."""
    fig = Figure(figsize=(12, 5.5), layout="constrained")
    axes = fig.subplots(2, 3, sharex=True)
    t = record.column("t")
    for ax, (col, label) in zip(axes.flat, PANELS):
        y = record.column(col)
        if col == "orientation_error_deg":
            y = np.abs(y)
        ax.plot(t, y, lw=0.9)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[1, 0].axhline(thresholds[0], color="k", ls="--", lw=0.7)
    axes[1, 2].axhline(thresholds[1], color="k", ls="--", lw=0.7)
    for ax in axes[1]:
        ax.set_xlabel("t [s]")
    if title:
        fig.suptitle(title)
    path = Path(path)
    fig.savefig(path, dpi=110)
    return path


def plot_suite(result, path) -> Path:
    """Pixel and orientation error of every episode in a suite, log scale."""
    fig = Figure(figsize=(10, 4), layout="constrained")
    ax_px, ax_deg = fig.subplots(1, 2, sharex=True)
    for e in result.episodes:
        t = e.record.column("t")
        ax_px.semilogy(t, np.maximum(e.record.column("pixel_error"), 1e-3), lw=0.8)
        ax_deg.semilogy(t, np.maximum(np.abs(e.record.column("orientation_error_deg")), 1e-3), lw=0.8)
    for ax, label in ((ax_px, "pixel error [px]"), (ax_deg, "orientation error [deg]")):
        ax.axhline(1.0, color="k", ls="--", lw=0.7)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3, which="both")
    fig.suptitle(f"{result.label} ({len(result.episodes)} episodes)")
    path = Path(path)
    fig.savefig(path, dpi=110)
    return path


def plot_table(columns: dict[str, dict], path) -> Path:
    """Bar chart of mean settle times per suite column."""
    labels = list(columns)
    fig = Figure(figsize=(max(6, 1.1 * len(labels)), 4), layout="constrained")
    ax = fig.subplots()
    x = np.arange(len(labels))
    for offset, key, name in ((-0.2, "t_r", "t_r"), (0.2, "t_phi", "t_phi")):
        vals = [columns[lab][key] if columns[lab][key] is not None else np.nan for lab in labels]
        ax.bar(x + offset, vals, width=0.4, label=name)
    ax.set_xticks(x, labels, rotation=45, ha="right")
    ax.set_ylabel("mean settle time [s]")
    ax.legend()
    path = Path(path)
    fig.savefig(path, dpi=110)
    return path
