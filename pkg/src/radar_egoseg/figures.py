"""Figure rendering for CLI reports.

All figures are written as SVG with a pinned hash salt and no embedded
creation date, so rerunning a command reproduces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .solver import TimedPose  # noqa: E402

plt.rcParams["svg.hashsalt"] = "radar-egoseg"

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _pose_xy(poses: Sequence[TimedPose]) -> tuple[list[float], list[float]]:
    return [p.x_m for p in poses], [p.y_m for p in poses]


def save_training_curve(
    path: str | Path,
    epochs: Sequence[int],
    losses: Sequence[float],
    learning_rates: Sequence[float],
) -> None:
    """Loss per epoch with the learning-rate schedule on a twin axis."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(epochs, losses, color="tab:blue", label="training loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    twin = ax.twinx()
    twin.plot(epochs, learning_rates, color="tab:orange", drawstyle="steps-post",
              alpha=0.7, label="learning rate")
    twin.set_ylabel("learning rate")
    twin.set_yscale("log")
    lines = ax.get_lines() + twin.get_lines()
    ax.legend(lines, [line.get_label() for line in lines], loc="upper right")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_trajectory_overlay(
    path: str | Path,
    reference: Sequence[TimedPose],
    estimated: Sequence[TimedPose],
) -> None:
    """Reference and estimated paths in the world frame, equal aspect."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    rx, ry = _pose_xy(reference)
    ex, ey = _pose_xy(estimated)
    ax.plot(rx, ry, color="tab:green", label="reference")
    ax.plot(ex, ey, color="tab:red", linestyle="--", label="estimated")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_map_figure(
    path: str | Path,
    static_xy,
    reference: Sequence[TimedPose],
    estimated: Sequence[TimedPose],
) -> None:
    """Accumulated static points plus both trajectories."""
    fig, ax = plt.subplots(figsize=(7.0, 7.0))
    if len(static_xy):
        ax.scatter(static_xy[:, 0], static_xy[:, 1], s=2.0, color="0.4",
                   linewidths=0.0, label="static points")
    rx, ry = _pose_xy(reference)
    ex, ey = _pose_xy(estimated)
    ax.plot(rx, ry, color="tab:green", label="reference")
    ax.plot(ex, ey, color="tab:red", linestyle="--", label="estimated")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
