"""Evaluation glue: predictions + labeled frames -> metrics and map data.

Detection quality is scored on moving-object instances: both the labeled
and the predicted moving points are clustered per frame and the cluster
centroids matched.  Ego-motion quality is scored per frame (saturated
RMSE, in cm/s and deg/s) and per driven distance segment (endpoint error
after re-integrating the estimate from the reference segment start).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instances import ClusterConfig, match_moving_points
from .metrics import SRmseConfig, detection_scores, s_rmse, segment_endpoint_errors
from .points import PointClass, RadarExtrinsics, RadarFrame, cartesian_xy
from .sequence_io import FramePrediction
from .solver import EgoMotionState, TimedPose, integrate_trajectory

CM_PER_M = 100.0
DEG_PER_RAD = 180.0 / np.pi


@dataclass(frozen=True)
class SequenceEvaluation:
    """Per-sequence raw material for pooled metrics."""

    name: str
    tp: int
    fp: int
    fn: int
    speed_gt_cm_s: np.ndarray
    speed_est_cm_s: np.ndarray
    omega_gt_deg_s: np.ndarray
    omega_est_deg_s: np.ndarray
    segment_errors_m: tuple[float, ...]
    frames: int
    ego_frames: int


def _check_alignment(frames: Sequence[RadarFrame], predictions: Sequence[FramePrediction]) -> None:
    if len(frames) != len(predictions):
        raise ValueError(
            f"{len(predictions)} predictions for {len(frames)} frames"
        )
    for frame, pred in zip(frames, predictions):
        if len(pred.labels) != frame.num_points:
            raise ValueError(
                f"prediction size {len(pred.labels)} != frame size "
                f"{frame.num_points} at t={frame.timestamp_s}"
            )


def _ego_state_series(
    frames: Sequence[RadarFrame], predictions: Sequence[FramePrediction]
) -> list[EgoMotionState]:
    """Estimated state per frame; holds the last estimate over gaps."""
    held = EgoMotionState(0.0, 0.0)
    series = []
    for pred in predictions:
        if pred.ego is not None and not pred.flagged:
            held = pred.ego
        series.append(held)
    return series


def reference_states(frames: Sequence[RadarFrame]) -> list[EgoMotionState] | None:
    """Odometry per frame, or None when any frame lacks it."""
    states = []
    for frame in frames:
        if frame.odom is None:
            return None
        states.append(frame.odom)
    return states


def reference_poses(frames: Sequence[RadarFrame]) -> list[TimedPose] | None:
    states = reference_states(frames)
    if states is None:
        return None
    timed = [(state, frame.timestamp_s) for state, frame in zip(states, frames)]
    return integrate_trajectory(timed)


def estimated_poses(
    frames: Sequence[RadarFrame], predictions: Sequence[FramePrediction]
) -> list[TimedPose]:
    _check_alignment(frames, predictions)
    series = _ego_state_series(frames, predictions)
    timed = [(state, frame.timestamp_s) for state, frame in zip(series, frames)]
    return integrate_trajectory(timed)


def evaluate_sequence(
    name: str,
    frames: Sequence[RadarFrame],
    predictions: Sequence[FramePrediction],
    cluster: ClusterConfig,
    segment_length_m: float = 50.0,
) -> SequenceEvaluation:
    """Score one sequence; frames must carry ground truth."""
    _check_alignment(frames, predictions)
    tp = fp = fn = 0
    speed_gt, speed_est, omega_gt, omega_est = [], [], [], []
    for frame, pred in zip(frames, predictions):
        if frame.gt is None:
            raise ValueError(f"frame at t={frame.timestamp_s} has no ground truth")
        xy = cartesian_xy(frame.ranges, frame.azimuths)
        gt_xy = xy[frame.gt.classes == PointClass.MOVING]
        pred_xy = xy[pred.labels == PointClass.MOVING]
        assoc = match_moving_points(gt_xy, pred_xy, cluster)
        tp += assoc.tp
        fp += assoc.fp
        fn += assoc.fn
        if frame.odom is not None and pred.ego is not None and not pred.flagged:
            speed_gt.append(frame.odom.v_x_mps * CM_PER_M)
            speed_est.append(pred.ego.v_x_mps * CM_PER_M)
            omega_gt.append(frame.odom.omega_radps * DEG_PER_RAD)
            omega_est.append(pred.ego.omega_radps * DEG_PER_RAD)

    segment_errors: tuple[float, ...] = ()
    poses = reference_poses(frames)
    if poses is not None:
        states = _ego_state_series(frames, predictions)
        timed = [
            (state, frame.timestamp_s) for state, frame in zip(states, frames)
        ]
        try:
            errors = segment_endpoint_errors(poses, timed, segment_length_m)
        except ValueError:
            errors = []
        segment_errors = tuple(errors)

    return SequenceEvaluation(
        name=name,
        tp=tp,
        fp=fp,
        fn=fn,
        speed_gt_cm_s=np.asarray(speed_gt, dtype=np.float64),
        speed_est_cm_s=np.asarray(speed_est, dtype=np.float64),
        omega_gt_deg_s=np.asarray(omega_gt, dtype=np.float64),
        omega_est_deg_s=np.asarray(omega_est, dtype=np.float64),
        segment_errors_m=segment_errors,
        frames=len(frames),
        ego_frames=len(speed_gt),
    )


def _srmse_pair(
    evaluation_list: Sequence[SequenceEvaluation], srmse: SRmseConfig
) -> tuple[float | None, float | None]:
    speed_gt = np.concatenate([e.speed_gt_cm_s for e in evaluation_list]) if evaluation_list else np.empty(0)
    speed_est = np.concatenate([e.speed_est_cm_s for e in evaluation_list]) if evaluation_list else np.empty(0)
    omega_gt = np.concatenate([e.omega_gt_deg_s for e in evaluation_list]) if evaluation_list else np.empty(0)
    omega_est = np.concatenate([e.omega_est_deg_s for e in evaluation_list]) if evaluation_list else np.empty(0)
    if speed_gt.size == 0:
        return None, None
    speed = s_rmse(speed_gt, speed_est, srmse.speed_c_err_cm_s, srmse.speed_s_cm_s)
    omega = s_rmse(omega_gt, omega_est, srmse.omega_c_err_deg_s, srmse.omega_s_deg_s)
    return speed, omega


def _sequence_summary(e: SequenceEvaluation, srmse: SRmseConfig) -> dict:
    scores = detection_scores(e.tp, e.fp, e.fn)
    speed, omega = _srmse_pair([e], srmse) if e.ego_frames else (None, None)
    rte = float(np.mean(e.segment_errors_m)) if e.segment_errors_m else None
    return {
        "counts": {"tp": e.tp, "fp": e.fp, "fn": e.fn},
        "fdr": scores.fdr,
        "mdr": scores.mdr,
        "f1": scores.f1,
        "iou": scores.iou,
        "s_rmse_vx_cm_s": speed,
        "s_rmse_omega_deg_s": omega,
        "rte_50_m": rte,
        "frames": e.frames,
        "ego_frames": e.ego_frames,
        "segments": len(e.segment_errors_m),
    }


def aggregate_metrics(
    evaluations: Sequence[SequenceEvaluation],
    srmse: SRmseConfig,
    window_length: int,
    segment_length_m: float = 50.0,
) -> dict:
    """Pool per-sequence material into the metrics report payload."""
    tp = sum(e.tp for e in evaluations)
    fp = sum(e.fp for e in evaluations)
    fn = sum(e.fn for e in evaluations)
    scores = detection_scores(tp, fp, fn)
    speed, omega = _srmse_pair(list(evaluations), srmse)
    all_segments = [err for e in evaluations for err in e.segment_errors_m]
    rte = float(np.mean(all_segments)) if all_segments else None
    return {
        "window_length": window_length,
        "segment_length_m": segment_length_m,
        "counts": {"tp": tp, "fp": fp, "fn": fn},
        "fdr": scores.fdr,
        "mdr": scores.mdr,
        "f1": scores.f1,
        "iou": scores.iou,
        "s_rmse_vx_cm_s": speed,
        "s_rmse_omega_deg_s": omega,
        "rte_50_m": rte,
        "frames": sum(e.frames for e in evaluations),
        "ego_frames": sum(e.ego_frames for e in evaluations),
        "segments": len(all_segments),
        "per_sequence": {e.name: _sequence_summary(e, srmse) for e in evaluations},
    }


def _transform_to_world(
    pose: TimedPose, extrinsics: RadarExtrinsics, local_xy: np.ndarray
) -> np.ndarray:
    """Sensor-frame points -> world frame through vehicle pose and mount."""
    ch, sh = np.cos(pose.heading_rad), np.sin(pose.heading_rad)
    sensor_x = pose.x_m + extrinsics.x_m * ch - extrinsics.y_m * sh
    sensor_y = pose.y_m + extrinsics.x_m * sh + extrinsics.y_m * ch
    heading = pose.heading_rad + extrinsics.theta_rad
    c, s = np.cos(heading), np.sin(heading)
    out = np.empty_like(local_xy)
    out[:, 0] = sensor_x + local_xy[:, 0] * c - local_xy[:, 1] * s
    out[:, 1] = sensor_y + local_xy[:, 0] * s + local_xy[:, 1] * c
    return out


def accumulate_static_map(
    frames: Sequence[RadarFrame],
    predictions: Sequence[FramePrediction],
    extrinsics: RadarExtrinsics,
    poses: Sequence[TimedPose] | None = None,
) -> np.ndarray:
    """World-frame positions of every point labeled static, (K, 2).

    Points are placed through the estimated trajectory unless explicit
    poses (for example the reference ones) are provided.
    """
    _check_alignment(frames, predictions)
    if poses is None:
        poses = estimated_poses(frames, predictions)
    if len(poses) != len(frames):
        raise ValueError(f"{len(poses)} poses for {len(frames)} frames")
    chunks = []
    for frame, pred, pose in zip(frames, predictions, poses):
        keep = pred.labels == PointClass.STATIC
        if not np.any(keep):
            continue
        local = cartesian_xy(frame.ranges[keep], frame.azimuths[keep])
        chunks.append(_transform_to_world(pose, extrinsics, local))
    if not chunks:
        return np.empty((0, 2), dtype=np.float64)
    return np.concatenate(chunks, axis=0)
