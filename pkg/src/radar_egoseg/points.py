"""Radar point cloud types, validation, and window assembly.

A frame is one radar scan: parallel arrays of range, azimuth, radial
velocity, and optionally RCS, plus ground-truth labels and odometry when
known.  Windows stack consecutive frames for the temporal network and
carry a validity mask so frames of different sizes can share one array.

Conventions: azimuth is measured in the sensor frame, normalized to
[-pi, pi); radial velocity is negative for approaching targets, so a
static return satisfies v_r = -(v_x cos a + v_y sin a) where (v_x, v_y)
is the sensor-frame velocity of the radar itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

#: Sentinel instance id for points that belong to no moving instance.
NO_INSTANCE = -1

#: Canonical per-point feature order used by feature matrices and the
#: JSON-Lines "pts" rows: range [m], azimuth [rad], radial velocity
#: [m/s], RCS [dBsm].
FEATURE_NAMES = ("range_m", "azimuth_rad", "radial_velocity_mps", "rcs_dbsm")


class PointClass(IntEnum):
    """Ground-truth / predicted class of a radar return."""

    STATIC = 0
    MOVING = 1
    FALSE_POSITIVE = 2


def wrap_angle(angle):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    a = np.asarray(angle, dtype=float)
    off = (a < -math.pi) | (a >= math.pi)
    if not np.any(off):
        # The modulo arithmetic below perturbs in-range values by one ulp,
        # which would break byte-stable serialization round trips.
        return a
    wrapped = (a + math.pi) % (2.0 * math.pi) - math.pi
    return np.where(off, wrapped, a)


def cartesian_xy(ranges, azimuths):
    """Polar (range, azimuth) to sensor-frame Cartesian (N, 2) array."""
    r = np.asarray(ranges, dtype=float)
    a = np.asarray(azimuths, dtype=float)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RadarPoint:
    """A single radar detection."""

    range_m: float
    azimuth_rad: float
    radial_velocity_mps: float
    rcs_dbsm: float | None = None


@dataclass(frozen=True)
class EgoMotionState:
    """Instantaneous vehicle motion: forward speed and yaw rate.

    The vehicle frame has its origin at the rear axle center with x
    pointing forward, so lateral velocity is zero by construction.
    """

    v_x_mps: float
    omega_radps: float


@dataclass(frozen=True)
class RadarMotion:
    """Sensor-frame velocity of the radar itself (2D)."""

    v_x_mps: float
    v_y_mps: float


@dataclass(frozen=True)
class RadarExtrinsics:
    """Radar mount pose in the vehicle frame.

    x_m, y_m locate the sensor relative to the rear axle center and
    theta_rad is its boresight yaw.  x_m must be nonzero for yaw rate to
    be observable from a single sensor; operations that need that raise
    DegenerateExtrinsicsError rather than this type rejecting it.
    """

    x_m: float
    y_m: float
    theta_rad: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta_rad", float(wrap_angle(self.theta_rad)))


@dataclass(frozen=True)
class GroundTruthLabels:
    """Per-point class labels with instance ids on moving points.

    instance_ids holds NO_INSTANCE (-1) exactly where the class is not
    MOVING; moving points carry a nonnegative id stable across frames.
    """

    classes: np.ndarray
    instance_ids: np.ndarray

    def __post_init__(self):
        classes = _frozen(self.classes, dtype=np.int8)
        ids = _frozen(self.instance_ids, dtype=np.int64)
        if classes.ndim != 1 or ids.shape != classes.shape:
            raise ValueError("classes and instance_ids must be parallel 1-D arrays")
        valid = np.isin(classes, [int(c) for c in PointClass])
        if not valid.all():
            raise ValueError(f"unknown point class at index {int(np.argmin(valid))}")
        moving = classes == PointClass.MOVING
        if (ids[moving] < 0).any():
            raise ValueError("moving points must carry a nonnegative instance id")
        if (ids[~moving] != NO_INSTANCE).any():
            raise ValueError("non-moving points must not carry an instance id")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "instance_ids", ids)

    @classmethod
    def from_lists(cls, classes: Sequence[int], instance_ids: Sequence[int | None]):
        ids = [NO_INSTANCE if i is None else int(i) for i in instance_ids]
        return cls(np.asarray(classes), np.asarray(ids))

    def __len__(self):
        return self.classes.shape[0]

    def instance_id_or_none(self, i: int) -> int | None:
        v = int(self.instance_ids[i])
        return None if v == NO_INSTANCE else v


@dataclass(frozen=True)
class PointWeights:
    """Per-point soft scores through one inference pass.

    static_ini / moving_ini come from the network heads in [0, 1];
    static_new is the Gaussian-density re-weight from the motion fit
    (peaks near 30.7, not a probability); moving_new is moving_ini with
    confidently static points gated to zero.
    """

    static_ini: np.ndarray
    static_new: np.ndarray
    moving_ini: np.ndarray
    moving_new: np.ndarray

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("static_ini", "static_new", "moving_ini", "moving_new"):
            arr = _frozen(getattr(self, name))
            if arr.ndim != 1:
                raise ValueError(f"{name} must be 1-D")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise ValueError("weight arrays must have equal length")
            if (arr < 0).any():
                raise ValueError(f"{name} must be nonnegative")
            arrays[name] = arr
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class RadarFrame:
    """One radar scan with optional ground truth and odometry."""

    timestamp_s: float
    sensor_id: int
    ranges: np.ndarray
    azimuths: np.ndarray
    radial_velocities: np.ndarray
    rcs: np.ndarray | None = None
    gt: GroundTruthLabels | None = None
    odom: EgoMotionState | None = None

    def __post_init__(self):
        for name in ("ranges", "azimuths", "radial_velocities"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.rcs is not None:
            object.__setattr__(self, "rcs", _frozen(self.rcs))

    @property
    def num_points(self) -> int:
        return self.ranges.shape[0]

    def point(self, i: int) -> RadarPoint:
        return RadarPoint(
            float(self.ranges[i]),
            float(self.azimuths[i]),
            float(self.radial_velocities[i]),
            None if self.rcs is None else float(self.rcs[i]),
        )

    @classmethod
    def from_points(
        cls,
        timestamp_s: float,
        sensor_id: int,
        points: Iterable[RadarPoint],
        gt: GroundTruthLabels | None = None,
        odom: EgoMotionState | None = None,
    ) -> "RadarFrame":
        pts = list(points)
        rcs = None
        if pts and pts[0].rcs_dbsm is not None:
            rcs = [p.rcs_dbsm for p in pts]
        return cls(
            timestamp_s,
            sensor_id,
            np.array([p.range_m for p in pts]),
            np.array([p.azimuth_rad for p in pts]),
            np.array([p.radial_velocity_mps for p in pts]),
            None if rcs is None else np.array(rcs),
            gt,
            odom,
        )

    def feature_matrix(self, num_features: int = 4) -> np.ndarray:
        """Stack per-point features as an (N, num_features) array.

        Column order follows FEATURE_NAMES.  Asking for 4 features on a
        frame without RCS is an error rather than a silent zero-fill.
        """
        if num_features not in (3, 4):
            raise ValueError("num_features must be 3 or 4")
        cols = [self.ranges, self.azimuths, self.radial_velocities]
        if num_features == 4:
            if self.rcs is None:
                raise ValueError("frame has no RCS channel; use num_features=3")
            cols.append(self.rcs)
        if self.num_points == 0:
            return np.zeros((0, num_features))
        return np.stack(cols, axis=1)

    def with_gt(self, gt: GroundTruthLabels | None) -> "RadarFrame":
        return RadarFrame(
            self.timestamp_s, self.sensor_id, self.ranges, self.azimuths,
            self.radial_velocities, self.rcs, gt, self.odom,
        )


@dataclass(frozen=True)
class Violation:
    """One validation failure: which field, which point (or None), why."""

    field: str
    index: int | None
    message: str


def validate_frame(frame: RadarFrame) -> list[Violation]:
    """Check a frame against the data contract; return all violations.

    An empty list means the frame is valid.  Checks cover finiteness,
    range nonnegativity, azimuth domain, array length agreement, and
    ground-truth consistency.
    """
    out: list[Violation] = []
    if not math.isfinite(frame.timestamp_s):
        out.append(Violation("timestamp_s", None, "timestamp must be finite"))
    if frame.sensor_id < 0:
        out.append(Violation("sensor_id", None, "sensor id must be nonnegative"))
    n = frame.num_points
    for name in ("azimuths", "radial_velocities"):
        if getattr(frame, name).shape[0] != n:
            out.append(Violation(name, None, "length differs from ranges"))
            return out
    if frame.rcs is not None and frame.rcs.shape[0] != n:
        out.append(Violation("rcs", None, "length differs from ranges"))
        return out
    for name in ("ranges", "azimuths", "radial_velocities", "rcs"):
        arr = getattr(frame, name)
        if arr is None:
            continue
        bad = ~np.isfinite(arr)
        for i in np.flatnonzero(bad):
            out.append(Violation(name, int(i), "value must be finite"))
    neg = frame.ranges < 0
    for i in np.flatnonzero(neg):
        out.append(Violation("ranges", int(i), "range must be nonnegative"))
    finite_az = np.isfinite(frame.azimuths)
    oob = finite_az & ((frame.azimuths < -math.pi) | (frame.azimuths >= math.pi))
    for i in np.flatnonzero(oob):
        out.append(Violation("azimuths", int(i), "azimuth must lie in [-pi, pi)"))
    if frame.gt is not None and len(frame.gt) != n:
        out.append(Violation("gt", None, "label count differs from point count"))
    return out


def validate_sequence(frames: Sequence[RadarFrame]) -> list[Violation]:
    """validate_frame over a sequence plus timestamp monotonicity."""
    out: list[Violation] = []
    for k, frame in enumerate(frames):
        for v in validate_frame(frame):
            out.append(Violation(f"frame[{k}].{v.field}", v.index, v.message))
    for k in range(1, len(frames)):
        if not frames[k].timestamp_s > frames[k - 1].timestamp_s:
            out.append(Violation(f"frame[{k}].timestamp_s", None,
                                 "timestamps must strictly increase"))
    return out


@dataclass(frozen=True)
class FrameWindow:
    """T consecutive frames padded to a common point count.

    mask has shape (T, N) where N is the largest frame in the window;
    mask[t, i] is True exactly for the real points of frame t.  The
    network predicts labels for the last frame only.
    """

    frames: tuple[RadarFrame, ...]
    mask: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "mask", _frozen(self.mask, dtype=bool))

    @classmethod
    def from_frames(cls, frames: Sequence[RadarFrame]) -> "FrameWindow":
        frames = tuple(frames)
        if not frames:
            raise ValueError("a window needs at least one frame")
        for k in range(1, len(frames)):
            if not frames[k].timestamp_s > frames[k - 1].timestamp_s:
                raise ValueError("window frames must be in increasing time order")
        n = max(f.num_points for f in frames)
        mask = np.zeros((len(frames), max(n, 1)), dtype=bool)
        for t, f in enumerate(frames):
            mask[t, : f.num_points] = True
        return cls(frames, mask)

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def max_points(self) -> int:
        return self.mask.shape[1]

    @property
    def last_frame(self) -> RadarFrame:
        return self.frames[-1]

    def feature_array(self, num_features: int = 4) -> np.ndarray:
        """Padded (T, N, num_features) feature tensor; padding rows are 0."""
        out = np.zeros((self.length, self.max_points, num_features))
        for t, f in enumerate(self.frames):
            if f.num_points:
                out[t, : f.num_points] = f.feature_matrix(num_features)
        return out


def sliding_windows(frames: Sequence[RadarFrame], length: int) -> list[FrameWindow]:
    """All full-length windows of `length` consecutive frames.

    A sequence of L frames yields L - length + 1 windows; fewer frames
    than `length` yields none.
    """
    if length < 1:
        raise ValueError("window length must be at least 1")
    frames = list(frames)
    return [
        FrameWindow.from_frames(frames[k : k + length])
        for k in range(len(frames) - length + 1)
    ]
