"""Detection-rate, robust-RMSE, and relative-trajectory-error metrics.

Counts are summed over all frames before any ratio is formed, so frames
with no objects cost nothing.  The robust RMSE saturates large errors at
a cap instead of letting single outliers dominate, and the trajectory
metric scores dead-reckoned position drift per fixed-length segment with
the estimate re-anchored to the reference pose at each segment start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .points import EgoMotionState
from .solver import TimedPose, advance_pose


@dataclass(frozen=True)
class DetectionScores:
    """Ratio metrics from summed counts; a field is None when its
    denominator is zero."""

    fdr: float | None
    mdr: float | None
    f1: float | None
    iou: float | None


def detection_scores(tp: int, fp: int, fn: int) -> DetectionScores:
    """False discovery rate, missed detection rate, F1, and IoU."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be nonnegative")
    fdr = fp / (fp + tp) if fp + tp > 0 else None
    mdr = fn / (fn + tp) if fn + tp > 0 else None
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else None
    union = tp + fp + fn
    iou = tp / union if union > 0 else None
    return DetectionScores(fdr, mdr, f1, iou)


@dataclass(frozen=True)
class SRmseConfig:
    """Saturation thresholds for the robust RMSE.

    Errors whose magnitude exceeds c_err are replaced by the fixed
    penalty s before squaring.  Units: cm/s for speed, deg/s for yaw
    rate.
    """

    speed_c_err_cm_s: float = 50.0
    speed_s_cm_s: float = 50.0
    omega_c_err_deg_s: float = 2.86
    omega_s_deg_s: float = 2.86

    def __post_init__(self):
        for name in ("speed_c_err_cm_s", "speed_s_cm_s",
                     "omega_c_err_deg_s", "omega_s_deg_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def s_rmse(gt_series, est_series, c_err: float, s: float) -> float:
    """Saturated RMSE between two aligned series.

    Per-sample deviation d is the raw error when |error| <= c_err and
    the constant s otherwise; the result is sqrt(mean(d^2)).  Series
    must be equally long and nonempty.
    """
    gt = np.asarray(gt_series, dtype=float)
    est = np.asarray(est_series, dtype=float)
    if gt.shape != est.shape or gt.ndim != 1:
        raise ValueError("series must be parallel 1-D arrays")
    if gt.size == 0:
        raise ValueError("series must be nonempty")
    err = est - gt
    d = np.where(np.abs(err) <= c_err, err, s)
    return float(np.sqrt(np.mean(d * d)))


def segment_endpoint_errors(
    gt_poses: Sequence[TimedPose],
    est_states: Sequence[tuple[EgoMotionState, float]],
    segment_length_m: float = 50.0,
) -> list[float]:
    """Endpoint error of each full arc-length segment.

    The reference trajectory is cut into consecutive segments of at
    least segment_length_m of chord arc length, each starting at the
    frame where the previous one ended.  Within a segment the estimated
    motion is dead-reckoned from the reference pose at the segment
    start (position and heading aligned), and the Euclidean distance
    between the two segment-end positions is recorded.  The trailing
    partial segment is dropped.

    Raises ValueError when the reference trajectory is shorter than one
    segment or the series disagree in length.
    """
    poses = list(gt_poses)
    states = list(est_states)
    if len(poses) != len(states):
        raise ValueError("pose and state series must be equally long")
    if segment_length_m <= 0:
        raise ValueError("segment_length_m must be positive")
    if len(poses) < 2:
        raise ValueError("trajectory shorter than one segment")
    xy = np.array([[p.x_m, p.y_m] for p in poses])
    steps = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    if arc[-1] < segment_length_m:
        raise ValueError(
            f"trajectory covers {arc[-1]:.1f} m, shorter than one "
            f"{segment_length_m:.0f} m segment"
        )
    errors = []
    start = 0
    while True:
        target = arc[start] + segment_length_m
        end = int(np.searchsorted(arc, target, side="left"))
        if end >= len(poses):
            break
        pose = TimedPose(
            poses[start].t_s,
            poses[start].x_m,
            poses[start].y_m,
            poses[start].heading_rad,
        )
        for k in range(start, end):
            dt = states[k + 1][1] - states[k][1]
            pose = advance_pose(pose, states[k][0], dt)
        errors.append(
            math.hypot(pose.x_m - poses[end].x_m, pose.y_m - poses[end].y_m)
        )
        start = end
    if not errors:
        raise ValueError("trajectory shorter than one segment")
    return errors


def rte_50(
    gt_poses: Sequence[TimedPose],
    est_states: Sequence[tuple[EgoMotionState, float]],
    segment_length_m: float = 50.0,
) -> float:
    """Mean segment endpoint error (meters)."""
    return float(
        np.mean(segment_endpoint_errors(gt_poses, est_states, segment_length_m))
    )
