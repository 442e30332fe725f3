"""Synthetic radar scenes with ground truth by construction.

Generates sequences that mimic a front-mounted automotive radar driving
past static roadside landmarks while a handful of constant-velocity
objects move through the field of view and sensor clutter fires at
random.  Every detection is produced from world-frame geometry, so class
labels, instance ids, and per-frame odometry are exact by construction.

Clutter radial velocities are drawn as a mixture of uniform-over-span
and small offsets from the static Doppler profile.  That keeps residual
magnitude alone from separating clutter and movers in a single scan;
persistence over consecutive scans is what disambiguates them.

Optionally the scene also spawns multipath ghosts: short-lived point
clusters placed, sized, and lit by the same recipe as moving objects,
with a coherent near-profile Doppler offset.  A single scan carries no
signal that tells such a ghost from a genuine mover; only its
one-to-two frame lifespan does.  Ghosts keep a clearance distance from
live movers so the two kinds of cluster never blend into one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .points import (
    NO_INSTANCE,
    EgoMotionState,
    GroundTruthLabels,
    PointClass,
    RadarExtrinsics,
    RadarFrame,
    wrap_angle,
)
from .solver import TimedPose, integrate_trajectory, vehicle_to_radar


@dataclass(frozen=True)
class SceneConfig:
    """Everything that defines a synthetic driving scene.

    The ego motion profile is a tuple of (duration_s, speed_mps,
    yaw_rate_radps) segments applied in order; the last segment extends
    to the end of the sequence if the profile runs short.
    """

    duration_s: float = 8.0
    frame_rate_hz: float = 16.7
    landmark_density_per_m: float = 1.0
    road_half_width_m: float = 4.0
    moving_object_count: int = 4
    moving_speed_range_mps: tuple[float, float] = (1.0, 8.0)
    moving_points_mean: float = 6.0
    moving_extent_m: float = 0.8
    moving_along_road_fraction: float = 0.7
    false_positive_rate_per_frame: float = 3.0
    fp_near_profile_fraction: float = 0.5
    fp_near_profile_offset_mps: tuple[float, float] = (0.5, 6.0)
    ghost_rate_per_frame: float = 0.0
    ghost_points_mean: float = 3.0
    ghost_extent_m: float = 1.0
    ghost_lifetime_frames: tuple[int, int] = (1, 2)
    ghost_offset_mps: tuple[float, float] = (0.35, 1.3)
    ghost_clearance_m: float = 6.0
    doppler_span_mps: float = 15.0
    noise_sigma_vr_mps: float = 0.013
    noise_sigma_range_m: float = 0.05
    noise_sigma_azimuth_rad: float = 0.003
    fov_max_range_m: float = 40.0
    fov_min_range_m: float = 1.0
    fov_half_angle_rad: float = math.radians(60.0)
    extrinsics: RadarExtrinsics = field(
        default_factory=lambda: RadarExtrinsics(3.5, 0.0, 0.0)
    )
    ego_profile: tuple[tuple[float, float, float], ...] = (
        (4.0, 10.0, 0.0),
        (4.0, 10.0, 0.12),
    )
    gt_static_threshold_mps: float | None = None

    def __post_init__(self):
        positives = {
            "duration_s": self.duration_s,
            "frame_rate_hz": self.frame_rate_hz,
            "road_half_width_m": self.road_half_width_m,
            "moving_points_mean": self.moving_points_mean,
            "moving_extent_m": self.moving_extent_m,
            "doppler_span_mps": self.doppler_span_mps,
            "fov_max_range_m": self.fov_max_range_m,
            "fov_half_angle_rad": self.fov_half_angle_rad,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        nonneg = {
            "landmark_density_per_m": self.landmark_density_per_m,
            "moving_object_count": self.moving_object_count,
            "false_positive_rate_per_frame": self.false_positive_rate_per_frame,
            "noise_sigma_vr_mps": self.noise_sigma_vr_mps,
            "noise_sigma_range_m": self.noise_sigma_range_m,
            "noise_sigma_azimuth_rad": self.noise_sigma_azimuth_rad,
            "fov_min_range_m": self.fov_min_range_m,
        }
        for name, value in nonneg.items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.fov_min_range_m >= self.fov_max_range_m:
            raise ValueError("fov_min_range_m must be below fov_max_range_m")
        lo, hi = self.moving_speed_range_mps
        if lo < 0 or hi < lo:
            raise ValueError("moving_speed_range_mps must satisfy 0 <= lo <= hi")
        if not 0 <= self.moving_along_road_fraction <= 1:
            raise ValueError("moving_along_road_fraction must lie in [0, 1]")
        if not 0 <= self.fp_near_profile_fraction <= 1:
            raise ValueError("fp_near_profile_fraction must lie in [0, 1]")
        olo, ohi = self.fp_near_profile_offset_mps
        if olo < 0 or ohi < olo:
            raise ValueError("fp_near_profile_offset_mps must satisfy 0 <= lo <= hi")
        if self.ghost_rate_per_frame < 0:
            raise ValueError("ghost_rate_per_frame must be nonnegative")
        if self.ghost_points_mean <= 0:
            raise ValueError("ghost_points_mean must be positive")
        if self.ghost_extent_m <= 0:
            raise ValueError("ghost_extent_m must be positive")
        llo, lhi = self.ghost_lifetime_frames
        if llo < 1 or lhi < llo:
            raise ValueError("ghost_lifetime_frames must satisfy 1 <= lo <= hi")
        glo, ghi = self.ghost_offset_mps
        if glo <= 0 or ghi < glo:
            raise ValueError("ghost_offset_mps must satisfy 0 < lo <= hi")
        if self.ghost_clearance_m < 0:
            raise ValueError("ghost_clearance_m must be nonnegative")
        if not self.ego_profile:
            raise ValueError("ego_profile must have at least one segment")
        for seg in self.ego_profile:
            if len(seg) != 3:
                raise ValueError("ego_profile segments are (duration, speed, yaw_rate)")
            if seg[0] <= 0:
                raise ValueError("ego_profile segment durations must be positive")
        if (
            self.gt_static_threshold_mps is not None
            and self.gt_static_threshold_mps < 0
        ):
            raise ValueError("gt_static_threshold_mps must be nonnegative")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration_s * self.frame_rate_hz))

    @property
    def static_threshold_mps(self) -> float:
        """Residual below which truth calls a point static (3 sigma)."""
        if self.gt_static_threshold_mps is not None:
            return self.gt_static_threshold_mps
        return 3.0 * self.noise_sigma_vr_mps

    def ego_state_at(self, t_s: float) -> EgoMotionState:
        """Piecewise-constant profile lookup; last segment holds."""
        acc = 0.0
        for duration, speed, yaw_rate in self.ego_profile:
            acc += duration
            if t_s < acc:
                return EgoMotionState(speed, yaw_rate)
        last = self.ego_profile[-1]
        return EgoMotionState(last[1], last[2])


@dataclass(frozen=True)
class SimulatedSequence:
    """Frames with GT plus the true ego states that produced them."""

    frames: list[RadarFrame]
    ego_states: list[tuple[EgoMotionState, float]]
    landmarks_xy: np.ndarray


def observe_point(
    radar_xy, radar_heading_rad, point_xy, point_vel_xy, radar_vel_xy
):
    """Range, azimuth, radial velocity of a world point seen by the radar.

    All positions and velocities are world-frame; azimuth comes out in
    the sensor frame.  Radial velocity is the line-of-sight component of
    the relative velocity, negative for closing geometry.
    """
    dx = point_xy[0] - radar_xy[0]
    dy = point_xy[1] - radar_xy[1]
    rng = math.hypot(dx, dy)
    if rng == 0:
        raise ValueError("point coincides with the radar origin")
    azimuth = float(wrap_angle(math.atan2(dy, dx) - radar_heading_rad))
    vrel_x = point_vel_xy[0] - radar_vel_xy[0]
    vrel_y = point_vel_xy[1] - radar_vel_xy[1]
    vr = (vrel_x * dx + vrel_y * dy) / rng
    return rng, azimuth, vr


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _radar_pose(ego_pose: TimedPose, extrinsics: RadarExtrinsics):
    mount = _rot(ego_pose.heading_rad) @ np.array([extrinsics.x_m, extrinsics.y_m])
    xy = np.array([ego_pose.x_m, ego_pose.y_m]) + mount
    return xy, ego_pose.heading_rad + extrinsics.theta_rad


class _Path:
    """Ego path sampled densely enough to interpolate by arc length."""

    def __init__(self, poses: list[TimedPose], speeds: list[float]):
        self.xy = np.array([[p.x_m, p.y_m] for p in poses])
        self.heading = np.array([p.heading_rad for p in poses])
        steps = [
            abs(speeds[k]) * (poses[k + 1].t_s - poses[k].t_s)
            for k in range(len(poses) - 1)
        ]
        self.arc = np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def total(self) -> float:
        return float(self.arc[-1])

    def at(self, s: float):
        """Point and heading at arc length s (clamped to the path)."""
        s = min(max(s, 0.0), self.total)
        j = int(np.searchsorted(self.arc, s, side="right")) - 1
        j = min(max(j, 0), len(self.arc) - 2)
        ds = self.arc[j + 1] - self.arc[j]
        frac = 0.0 if ds == 0 else (s - self.arc[j]) / ds
        xy = self.xy[j] + frac * (self.xy[j + 1] - self.xy[j])
        return xy, float(self.heading[j])


def simulate_sequence(config: SceneConfig, seed: int) -> SimulatedSequence:
    """Generate one labeled radar sequence.

    Deterministic: the same (config, seed) yields bit-identical output.
    """
    rng = np.random.default_rng(seed)
    n_frames = config.frame_count
    if n_frames < 1:
        raise ValueError("duration_s and frame_rate_hz give an empty sequence")
    dt = 1.0 / config.frame_rate_hz
    times = [k * dt for k in range(n_frames)]
    states = [(config.ego_state_at(t), t) for t in times]

    # Extend the path beyond the sequence so landmarks exist ahead of
    # the final pose out to sensor range.
    last_state = states[-1][0]
    lookahead = config.fov_max_range_m / max(abs(last_state.v_x_mps), 1.0) + 2.0 * dt
    ext_times = list(times)
    t = times[-1]
    while t < config.duration_s + lookahead:
        t += dt
        ext_times.append(t)
    ext_states = [(config.ego_state_at(min(t, config.duration_s - 1e-9)), t)
                  for t in ext_times]
    ext_poses = integrate_trajectory(ext_states)
    path = _Path(ext_poses, [s.v_x_mps for s, _ in ext_states])
    poses = ext_poses[:n_frames]

    # Static landmarks along both road edges.
    landmarks = []
    landmark_rcs = []
    for side in (1.0, -1.0):
        count = rng.poisson(config.landmark_density_per_m * max(path.total, 1e-9))
        for _ in range(count):
            s = rng.uniform(0.0, path.total)
            xy, heading = path.at(s)
            offset = side * (config.road_half_width_m + abs(rng.normal(0.0, 1.5)))
            normal = np.array([-math.sin(heading), math.cos(heading)])
            landmarks.append(xy + offset * normal)
            landmark_rcs.append(rng.normal(5.0, 4.0))
    landmarks_xy = (
        np.array(landmarks) if landmarks else np.zeros((0, 2))
    )
    landmark_rcs = np.array(landmark_rcs)

    # Moving objects: constant world-frame velocity, alive throughout.
    targets = []
    for idx in range(config.moving_object_count):
        k_ref = int(rng.integers(0, n_frames))
        radar_xy, radar_heading = _radar_pose(poses[k_ref], config.extrinsics)
        r = rng.uniform(
            config.fov_min_range_m + 4.0, 0.75 * config.fov_max_range_m
        )
        az = rng.uniform(-0.6, 0.6) * config.fov_half_angle_rad
        pos_ref = radar_xy + r * np.array(
            [math.cos(radar_heading + az), math.sin(radar_heading + az)]
        )
        speed = rng.uniform(*config.moving_speed_range_mps)
        if rng.random() < config.moving_along_road_fraction:
            heading = poses[k_ref].heading_rad
            if rng.random() < 0.5:
                heading += math.pi
        else:
            heading = rng.uniform(-math.pi, math.pi)
        vel = speed * np.array([math.cos(heading), math.sin(heading)])
        targets.append(
            {
                "id": idx,
                "start": pos_ref - vel * times[k_ref],
                "vel": vel,
                "rcs": rng.normal(12.0, 3.0),
            }
        )

    threshold = config.static_threshold_mps
    half_angle = config.fov_half_angle_rad

    def in_fov(r, az):
        return (
            config.fov_min_range_m <= r <= config.fov_max_range_m
            and abs(az) <= half_angle
        )

    frames = []
    ghosts = []
    for k, t_s in enumerate(times):
        ego = states[k][0]
        radar_xy, radar_heading = _radar_pose(poses[k], config.extrinsics)
        sensor_vel = vehicle_to_radar(ego, config.extrinsics)
        radar_vel = _rot(radar_heading) @ np.array(
            [sensor_vel.v_x_mps, sensor_vel.v_y_mps]
        )

        rows_r, rows_az, rows_vr, rows_rcs = [], [], [], []
        classes, inst = [], []

        def emit(r_true, az_true, vr_true, rcs_mean, cls, instance):
            r = r_true + rng.normal(0.0, config.noise_sigma_range_m)
            az = float(wrap_angle(az_true + rng.normal(0.0, config.noise_sigma_azimuth_rad)))
            vr = vr_true + rng.normal(0.0, config.noise_sigma_vr_mps)
            rows_r.append(max(r, 0.0))
            rows_az.append(az)
            rows_vr.append(vr)
            rows_rcs.append(rcs_mean + rng.normal(0.0, 2.0))
            classes.append(int(cls))
            inst.append(instance)

        for j in range(landmarks_xy.shape[0]):
            r, az, vr = observe_point(
                radar_xy, radar_heading, landmarks_xy[j], (0.0, 0.0), radar_vel
            )
            if in_fov(r, az):
                emit(r, az, vr, landmark_rcs[j], PointClass.STATIC, NO_INSTANCE)

        for tgt in targets:
            center = tgt["start"] + tgt["vel"] * t_s
            r, az, _ = observe_point(
                radar_xy, radar_heading, center, tgt["vel"], radar_vel
            )
            if not in_fov(r, az):
                continue
            for _ in range(rng.poisson(config.moving_points_mean)):
                pt = center + rng.normal(0.0, config.moving_extent_m, size=2)
                r, az, vr = observe_point(
                    radar_xy, radar_heading, pt, tgt["vel"], radar_vel
                )
                if not in_fov(r, az):
                    continue
                profile_vr = -(
                    sensor_vel.v_x_mps * math.cos(az)
                    + sensor_vel.v_y_mps * math.sin(az)
                )
                if abs(vr - profile_vr) <= threshold:
                    # Moving in the world but Doppler-indistinguishable
                    # from static: truth calls it static.
                    emit(r, az, vr, tgt["rcs"], PointClass.STATIC, NO_INSTANCE)
                else:
                    emit(r, az, vr, tgt["rcs"], PointClass.MOVING, tgt["id"])

        # Multipath ghosts: compact clusters that drift like movers and
        # carry a coherent off-profile Doppler for one or two frames,
        # then vanish.  Anchor, drift, spread, and rcs are drawn by the
        # same recipe as moving objects, so within a single scan a
        # ghost and a mover look alike; only persistence separates
        # them.  Spawns keep ghost_clearance_m away from live movers so
        # a ghost is never mistakable for points shed by a real object.
        # The block is skipped entirely at rate zero so the draw
        # sequence, and with it every byte of the default output, is
        # unchanged.
        if config.ghost_rate_per_frame > 0:
            ghosts = [g for g in ghosts if g["expires"] > k]
            mover_xy = np.array(
                [tgt["start"] + tgt["vel"] * t_s for tgt in targets]
            ).reshape(-1, 2)
            for _ in range(rng.poisson(config.ghost_rate_per_frame)):
                for _attempt in range(12):
                    k_ref = int(rng.integers(0, n_frames))
                    ref_xy, ref_heading = _radar_pose(
                        poses[k_ref], config.extrinsics
                    )
                    r0 = rng.uniform(
                        config.fov_min_range_m + 4.0,
                        0.75 * config.fov_max_range_m,
                    )
                    az0 = rng.uniform(-0.6, 0.6) * half_angle
                    pos_ref = ref_xy + r0 * np.array(
                        [math.cos(ref_heading + az0), math.sin(ref_heading + az0)]
                    )
                    speed = rng.uniform(*config.moving_speed_range_mps)
                    if rng.random() < config.moving_along_road_fraction:
                        heading = poses[k_ref].heading_rad
                        if rng.random() < 0.5:
                            heading += math.pi
                    else:
                        heading = rng.uniform(-math.pi, math.pi)
                    vel = speed * np.array([math.cos(heading), math.sin(heading)])
                    pos_now = pos_ref + vel * (t_s - times[k_ref])
                    r_now, az_now, _ = observe_point(
                        radar_xy, radar_heading, pos_now, (0.0, 0.0), radar_vel
                    )
                    if not in_fov(r_now, az_now):
                        continue
                    if mover_xy.shape[0] and (
                        np.min(np.hypot(*(mover_xy - pos_now).T))
                        < config.ghost_clearance_m
                    ):
                        continue
                    glo, ghi = config.ghost_offset_mps
                    # Log-uniform magnitude: residual dwell of real
                    # movers piles up near the low end, so ghosts do too.
                    mag = math.exp(rng.uniform(math.log(glo), math.log(ghi)))
                    life = int(
                        rng.integers(
                            config.ghost_lifetime_frames[0],
                            config.ghost_lifetime_frames[1] + 1,
                        )
                    )
                    ghosts.append(
                        {
                            "pos0": pos_now,
                            "vel": vel,
                            "born_t": t_s,
                            "offset": mag if rng.random() < 0.5 else -mag,
                            "rcs": rng.normal(12.0, 3.0),
                            "expires": k + life,
                        }
                    )
                    break
            for g in ghosts:
                center = g["pos0"] + g["vel"] * (t_s - g["born_t"])
                r, az, _ = observe_point(
                    radar_xy, radar_heading, center, (0.0, 0.0), radar_vel
                )
                if not in_fov(r, az):
                    continue
                for _ in range(rng.poisson(config.ghost_points_mean)):
                    pt = center + rng.normal(
                        0.0, config.ghost_extent_m, size=2
                    )
                    r, az, vr = observe_point(
                        radar_xy, radar_heading, pt, (0.0, 0.0), radar_vel
                    )
                    if not in_fov(r, az):
                        continue
                    cls = (
                        PointClass.STATIC
                        if abs(g["offset"]) <= threshold
                        else PointClass.FALSE_POSITIVE
                    )
                    emit(r, az, vr + g["offset"], g["rcs"], cls, NO_INSTANCE)

        for _ in range(rng.poisson(config.false_positive_rate_per_frame)):
            r = rng.uniform(config.fov_min_range_m, config.fov_max_range_m)
            az = rng.uniform(-half_angle, half_angle)
            profile_vr = -(
                sensor_vel.v_x_mps * math.cos(az)
                + sensor_vel.v_y_mps * math.sin(az)
            )
            if rng.random() < config.fp_near_profile_fraction:
                off = rng.uniform(*config.fp_near_profile_offset_mps)
                vr = profile_vr + (1.0 if rng.random() < 0.5 else -1.0) * off
            else:
                vr = rng.uniform(-config.doppler_span_mps, config.doppler_span_mps)
            cls = (
                PointClass.STATIC
                if abs(vr - profile_vr) <= threshold
                else PointClass.FALSE_POSITIVE
            )
            rows_r.append(r)
            rows_az.append(az)
            rows_vr.append(vr)
            rows_rcs.append(rng.normal(-2.0, 6.0))
            classes.append(int(cls))
            inst.append(NO_INSTANCE)

        order = rng.permutation(len(rows_r))
        gt = GroundTruthLabels(
            np.array(classes, dtype=np.int8)[order],
            np.array(inst, dtype=np.int64)[order],
        )
        frames.append(
            RadarFrame(
                t_s,
                0,
                np.array(rows_r)[order],
                np.array(rows_az)[order],
                np.array(rows_vr)[order],
                np.array(rows_rcs)[order],
                gt,
                ego,
            )
        )

    return SimulatedSequence(frames, states, landmarks_xy)


def generate_gt_labels(
    frame: RadarFrame,
    ego: EgoMotionState,
    extrinsics: RadarExtrinsics,
    residual_threshold_mps: float,
    moving_flags: Sequence[bool],
    moving_instance_ids: Sequence[int | None] | None = None,
) -> GroundTruthLabels:
    """Derive class labels from odometry and moving annotations.

    A point whose Doppler residual against the odometry-implied static
    profile is within the threshold is STATIC, even if annotated as
    moving (a Doppler radar cannot tell).  Annotated points that fail
    the static test are MOVING and must carry an instance id; everything
    else is FALSE_POSITIVE.
    """
    if residual_threshold_mps < 0:
        raise ValueError("residual_threshold_mps must be nonnegative")
    flags = np.asarray(moving_flags, dtype=bool)
    if flags.shape[0] != frame.num_points:
        raise ValueError("moving_flags must parallel the frame points")
    sensor_vel = vehicle_to_radar(ego, extrinsics)
    residual = (
        frame.radial_velocities
        + sensor_vel.v_x_mps * np.cos(frame.azimuths)
        + sensor_vel.v_y_mps * np.sin(frame.azimuths)
    )
    static = np.abs(residual) <= residual_threshold_mps
    moving = flags & ~static
    classes = np.full(frame.num_points, int(PointClass.FALSE_POSITIVE), dtype=np.int8)
    classes[static] = int(PointClass.STATIC)
    classes[moving] = int(PointClass.MOVING)
    ids = np.full(frame.num_points, NO_INSTANCE, dtype=np.int64)
    if moving.any():
        if moving_instance_ids is None:
            raise ValueError("moving points need moving_instance_ids")
        for i in np.flatnonzero(moving):
            value = moving_instance_ids[i]
            if value is None or int(value) < 0:
                raise ValueError(f"point {i} is moving but has no instance id")
            ids[i] = int(value)
    return GroundTruthLabels(classes, ids)


def apply_lifespan_filter(
    frames: Sequence[RadarFrame], min_frames: int = 5
) -> list[RadarFrame]:
    """Relabel moving instances seen in fewer than min_frames frames.

    Short-lived instances become FALSE_POSITIVE (they already failed the
    static test, otherwise they would not be labeled moving) and lose
    their instance id.  Instances alive exactly min_frames frames are
    kept.  With min_frames = 1 the input is returned unchanged.
    """
    if min_frames < 1:
        raise ValueError("min_frames must be at least 1")
    frames = list(frames)
    lifespan: dict[int, int] = {}
    for frame in frames:
        if frame.gt is None:
            raise ValueError("lifespan filter needs ground truth on every frame")
        moving = frame.gt.classes == PointClass.MOVING
        for inst in np.unique(frame.gt.instance_ids[moving]):
            lifespan[int(inst)] = lifespan.get(int(inst), 0) + 1
    short = {inst for inst, n in lifespan.items() if n < min_frames}
    if not short:
        return frames
    out = []
    for frame in frames:
        gt = frame.gt
        moving = gt.classes == PointClass.MOVING
        drop = moving & np.isin(gt.instance_ids, sorted(short))
        if not drop.any():
            out.append(frame)
            continue
        classes = gt.classes.copy()
        ids = gt.instance_ids.copy()
        classes[drop] = int(PointClass.FALSE_POSITIVE)
        ids[drop] = NO_INSTANCE
        out.append(frame.with_gt(GroundTruthLabels(classes, ids)))
    return out
