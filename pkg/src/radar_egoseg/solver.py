"""Weighted least-squares ego-motion from Doppler, and 2D kinematics.

A static return at azimuth a measured by a radar moving with sensor-frame
velocity (v_x, v_y) satisfies v_r = -(v_x cos a + v_y sin a).  Stacking
rows [cos a_i, sin a_i] against targets -v_r_i gives an overdetermined
linear system; solving its weighted normal equations recovers the sensor
velocity from a single scan.  Residuals of that fit re-score how static
each point looks, and rigid-body kinematics map the sensor velocity to
vehicle forward speed and yaw rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .points import EgoMotionState, RadarExtrinsics, RadarMotion


class SolverError(Exception):
    """Base class for ego-motion solver failures."""


class UnderdeterminedError(SolverError):
    """Fewer than two usable points; the 2-unknown fit has no solution."""


class IllConditionedError(SolverError):
    """Azimuth spread too small; normal matrix near singular."""


class DegenerateExtrinsicsError(SolverError):
    """Sensor mounted at x = 0; yaw rate unobservable from one radar."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the residual model and labeling thresholds.

    sigma_mps is the radial-velocity noise scale of the Gaussian
    re-weighting; c_static gates moving evidence off for points whose
    re-weight exceeds it; label_threshold turns soft weights into hard
    labels; refine_iterations counts solve-then-reweight rounds.
    """

    sigma_mps: float = 0.013
    c_static: float = 0.1
    label_threshold: float = 0.1
    condition_limit: float = 1e8
    refine_iterations: int = 1

    def __post_init__(self):
        if self.sigma_mps <= 0:
            raise ValueError("sigma_mps must be positive")
        if self.c_static < 0 or self.label_threshold < 0:
            raise ValueError("thresholds must be nonnegative")
        if self.condition_limit <= 1:
            raise ValueError("condition_limit must exceed 1")
        if self.refine_iterations < 1:
            raise ValueError("refine_iterations must be at least 1")


def doppler_residuals(azimuths, radial_velocities, motion: RadarMotion) -> np.ndarray:
    """Per-point deviation from the static-world Doppler profile [m/s]."""
    a = np.asarray(azimuths, dtype=float)
    vr = np.asarray(radial_velocities, dtype=float)
    return motion.v_x_mps * np.cos(a) + motion.v_y_mps * np.sin(a) + vr


def solve_wlsq(
    azimuths,
    radial_velocities,
    weights=None,
    *,
    condition_limit: float = 1e8,
) -> RadarMotion:
    """Weighted least-squares sensor velocity from one scan.

    Solves the 2x2 weighted normal equations for (v_x, v_y) minimizing
    sum_i w_i (v_x cos a_i + v_y sin a_i + v_r_i)^2.  Points with zero
    weight are ignored entirely.

    Raises UnderdeterminedError with fewer than two positively weighted
    points, IllConditionedError when the weighted normal matrix has a
    condition number beyond condition_limit (all azimuths nearly equal).
    """
    a = np.asarray(azimuths, dtype=float)
    vr = np.asarray(radial_velocities, dtype=float)
    if a.shape != vr.shape or a.ndim != 1:
        raise ValueError("azimuths and radial_velocities must be parallel 1-D arrays")
    if weights is None:
        w = np.ones_like(a)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != a.shape:
            raise ValueError("weights must parallel the points")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
    used = w > 0
    if int(used.sum()) < 2:
        raise UnderdeterminedError(
            f"need at least 2 positively weighted points, have {int(used.sum())}"
        )
    c = np.cos(a[used])
    s = np.sin(a[used])
    # The fit and the condition number are invariant to scaling the
    # weights; normalizing keeps the normal matrix away from under- and
    # overflow when the weights are extreme Gaussian densities.
    wu = w[used]
    wu = wu / wu.max()
    d = -vr[used]
    # Normal matrix M = A^T W A for A = [cos, sin] rows, and rhs A^T W d.
    m00 = float(np.dot(wu, c * c))
    m01 = float(np.dot(wu, c * s))
    m11 = float(np.dot(wu, s * s))
    b0 = float(np.dot(wu * c, d))
    b1 = float(np.dot(wu * s, d))
    # Eigenvalues of the symmetric 2x2 give the exact condition number.
    half_trace = 0.5 * (m00 + m11)
    disc = math.sqrt(max(0.25 * (m00 - m11) ** 2 + m01 * m01, 0.0))
    lam_max = half_trace + disc
    lam_min = half_trace - disc
    if lam_min <= 0 or lam_max / lam_min > condition_limit:
        condition = math.inf if lam_min <= 0 else lam_max / lam_min
        raise IllConditionedError(
            "azimuth spread too small for a stable velocity fit "
            f"(condition {condition:.3g})"
        )
    det = m00 * m11 - m01 * m01
    v_x = (m11 * b0 - m01 * b1) / det
    v_y = (m00 * b1 - m01 * b0) / det
    return RadarMotion(v_x, v_y)


def gaussian_weight_peak(sigma_mps: float) -> float:
    """Largest attainable re-weight: the density value at zero residual."""
    return 1.0 / (sigma_mps * math.sqrt(2.0 * math.pi))


def update_static_weights(
    azimuths, radial_velocities, motion: RadarMotion, sigma_mps: float = 0.013
) -> np.ndarray:
    """Re-score points by Gaussian density of their Doppler residual.

    Returns 1/(sigma sqrt(2 pi)) * exp(-r^2 / (2 sigma^2)) per point,
    deliberately left on the density scale: with sigma = 0.013 the peak
    is about 30.69 and the weight falls below 0.1 once |r| exceeds about
    0.044 m/s, which is what makes 0.1 a meaningful static threshold.
    """
    if sigma_mps <= 0:
        raise ValueError("sigma_mps must be positive")
    r = doppler_residuals(azimuths, radial_velocities, motion)
    peak = gaussian_weight_peak(sigma_mps)
    return peak * np.exp(-0.5 * (r / sigma_mps) ** 2)


def gate_moving_weights(static_new, moving_ini, c_static: float = 0.1) -> np.ndarray:
    """Zero the moving evidence of points the motion fit calls static.

    Keeps moving_ini where static_new <= c_static and returns 0
    elsewhere.  The boundary keeps the moving weight.  Applying the gate
    twice changes nothing.
    """
    sn = np.asarray(static_new, dtype=float)
    mi = np.asarray(moving_ini, dtype=float)
    if sn.shape != mi.shape:
        raise ValueError("static_new and moving_ini must be parallel")
    return np.where(sn <= c_static, mi, 0.0)


def vehicle_to_radar(ego: EgoMotionState, extrinsics: RadarExtrinsics) -> RadarMotion:
    """Sensor-frame velocity of a radar mounted on a moving vehicle.

    Rigid-body velocity at the mount point (x, y) is
    (v_x_car - omega * y, omega * x) in the vehicle frame; rotating by
    -theta expresses it along the sensor boresight.
    """
    vx_mount = ego.v_x_mps - ego.omega_radps * extrinsics.y_m
    vy_mount = ego.omega_radps * extrinsics.x_m
    ct = math.cos(extrinsics.theta_rad)
    st = math.sin(extrinsics.theta_rad)
    return RadarMotion(ct * vx_mount + st * vy_mount, -st * vx_mount + ct * vy_mount)


def radar_to_vehicle(motion: RadarMotion, extrinsics: RadarExtrinsics) -> EgoMotionState:
    """Invert vehicle_to_radar: vehicle forward speed and yaw rate.

    Requires a sensor mounted ahead of or behind the rear axle
    (x_m != 0); raises DegenerateExtrinsicsError otherwise.
    """
    if extrinsics.x_m == 0:
        raise DegenerateExtrinsicsError("yaw rate unobservable with x_m = 0")
    ct = math.cos(extrinsics.theta_rad)
    st = math.sin(extrinsics.theta_rad)
    omega = (motion.v_y_mps * ct + motion.v_x_mps * st) / extrinsics.x_m
    v_x_car = motion.v_x_mps * ct - motion.v_y_mps * st + extrinsics.y_m * omega
    return EgoMotionState(v_x_car, omega)


@dataclass(frozen=True)
class TimedPose:
    """Planar pose (x, y, heading) at a timestamp."""

    t_s: float
    x_m: float
    y_m: float
    heading_rad: float


#: Yaw rates below this integrate as straight lines to dodge 0/0.
_OMEGA_EPS = 1e-12


def advance_pose(
    pose: TimedPose, state: EgoMotionState, dt_s: float
) -> TimedPose:
    """Propagate a pose by dt under constant speed and yaw rate.

    Uses the exact circular arc; falls back to a straight segment when
    the yaw rate is numerically zero.
    """
    v = state.v_x_mps
    w = state.omega_radps
    h0 = pose.heading_rad
    h1 = h0 + w * dt_s
    if abs(w) > _OMEGA_EPS:
        x = pose.x_m + (v / w) * (math.sin(h1) - math.sin(h0))
        y = pose.y_m - (v / w) * (math.cos(h1) - math.cos(h0))
    else:
        x = pose.x_m + v * math.cos(h0) * dt_s
        y = pose.y_m + v * math.sin(h0) * dt_s
    return TimedPose(pose.t_s + dt_s, x, y, h1)


def integrate_trajectory(
    states: Sequence[tuple[EgoMotionState, float]],
    initial_pose: TimedPose | None = None,
) -> list[TimedPose]:
    """Dead-reckon poses from timestamped motion states.

    Each state holds from its own timestamp until the next one
    (zero-order hold); the final state's motion is never used.  Returns
    one pose per input timestamp, the first at the initial pose (the
    origin by default).
    """
    if not states:
        raise ValueError("need at least one timestamped state")
    times = [t for _, t in states]
    for k in range(1, len(times)):
        if not times[k] > times[k - 1]:
            raise ValueError("state timestamps must strictly increase")
    pose = initial_pose or TimedPose(times[0], 0.0, 0.0, 0.0)
    pose = TimedPose(times[0], pose.x_m, pose.y_m, pose.heading_rad)
    out = [pose]
    for k in range(1, len(states)):
        state = states[k - 1][0]
        pose = advance_pose(pose, state, times[k] - times[k - 1])
        out.append(pose)
    return out
