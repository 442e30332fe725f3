"""On-disk formats: sequence JSONL, dataset manifest, predictions.

A sequence file holds one JSON object per line, one line per frame:

    {"t": <s>, "sensor": <id>, "pts": [[range, azimuth, vr, rcs], ...],
     "gt": {"class": [0|1|2, ...], "inst": [id|null, ...]},
     "odom": [v_x, omega]}

"gt" and "odom" are optional; "pts" rows may have 3 entries when RCS is
unavailable.  Class codes: 0 static, 1 moving, 2 false positive.  JSON
floats round-trip exactly (shortest-repr encoding), so write followed
by read is lossless.

The manifest and the predictions file carry explicit format names and
versions; readers reject anything unknown.  Azimuths are normalized to
[-pi, pi) at ingestion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .points import (
    NO_INSTANCE,
    EgoMotionState,
    GroundTruthLabels,
    RadarExtrinsics,
    RadarFrame,
    RadarMotion,
    wrap_angle,
)

MANIFEST_FORMAT = "radar-egoseg/dataset"
MANIFEST_VERSION = 1
PREDICTIONS_FORMAT = "radar-egoseg/predictions"
PREDICTIONS_VERSION = 1
METRICS_FORMAT = "radar-egoseg/metrics"
METRICS_VERSION = 1


class FormatError(Exception):
    """Unreadable or unsupported input file."""


def _frame_to_obj(frame: RadarFrame) -> dict:
    if frame.rcs is not None:
        pts = [
            [float(r), float(a), float(v), float(c)]
            for r, a, v, c in zip(
                frame.ranges, frame.azimuths, frame.radial_velocities, frame.rcs
            )
        ]
    else:
        pts = [
            [float(r), float(a), float(v)]
            for r, a, v in zip(frame.ranges, frame.azimuths, frame.radial_velocities)
        ]
    obj = {"t": float(frame.timestamp_s), "sensor": int(frame.sensor_id), "pts": pts}
    if frame.gt is not None:
        obj["gt"] = {
            "class": [int(c) for c in frame.gt.classes],
            "inst": [frame.gt.instance_id_or_none(i) for i in range(len(frame.gt))],
        }
    if frame.odom is not None:
        obj["odom"] = [float(frame.odom.v_x_mps), float(frame.odom.omega_radps)]
    return obj


def _frame_from_obj(obj: dict, where: str) -> RadarFrame:
    try:
        pts = obj["pts"]
        widths = {len(row) for row in pts}
        if widths - {3, 4}:
            raise FormatError(f"{where}: pts rows must have 3 or 4 values")
        if len(widths) > 1:
            raise FormatError(f"{where}: pts rows disagree on RCS presence")
        has_rcs = widths == {4}
        ranges = np.array([row[0] for row in pts], dtype=float)
        azimuths = wrap_angle(np.array([row[1] for row in pts], dtype=float))
        vr = np.array([row[2] for row in pts], dtype=float)
        rcs = (
            np.array([row[3] for row in pts], dtype=float) if has_rcs else None
        )
        gt = None
        if "gt" in obj:
            gt = GroundTruthLabels.from_lists(obj["gt"]["class"], obj["gt"]["inst"])
        odom = None
        if "odom" in obj:
            odom = EgoMotionState(float(obj["odom"][0]), float(obj["odom"][1]))
        return RadarFrame(
            float(obj["t"]), int(obj["sensor"]), ranges, azimuths, vr, rcs, gt, odom
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def write_sequence(path: str | Path, frames: Sequence[RadarFrame]) -> None:
    lines = [
        json.dumps(_frame_to_obj(f), allow_nan=False, separators=(",", ":"))
        for f in frames
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_sequence(path: str | Path) -> list[RadarFrame]:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            frames.append(_frame_from_obj(obj, f"{path}:{lineno}"))
    return frames


@dataclass(frozen=True)
class SequenceEntry:
    """One sequence in a dataset manifest."""

    path: str
    frames: int
    points: int
    weight: float = 1.0


@dataclass(frozen=True)
class DatasetManifest:
    """Index of a dataset directory: sequences plus shared metadata."""

    seed: int
    config_hash: str
    extrinsics: RadarExtrinsics
    sequences: tuple[SequenceEntry, ...]


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    obj = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "seed": manifest.seed,
        "config_hash": manifest.config_hash,
        "extrinsics": {
            "x_m": manifest.extrinsics.x_m,
            "y_m": manifest.extrinsics.y_m,
            "theta_rad": manifest.extrinsics.theta_rad,
        },
        "sequences": [
            {"path": s.path, "frames": s.frames, "points": s.points, "weight": s.weight}
            for s in manifest.sequences
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> DatasetManifest:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    if obj.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: not a dataset manifest")
    if obj.get("version") != MANIFEST_VERSION:
        raise FormatError(
            f"{path}: unsupported manifest version {obj.get('version')!r}; "
            f"this build reads {MANIFEST_VERSION}"
        )
    try:
        ext = obj["extrinsics"]
        return DatasetManifest(
            int(obj["seed"]),
            str(obj["config_hash"]),
            RadarExtrinsics(
                float(ext["x_m"]), float(ext["y_m"]), float(ext["theta_rad"])
            ),
            tuple(
                SequenceEntry(
                    str(s["path"]),
                    int(s["frames"]),
                    int(s["points"]),
                    float(s.get("weight", 1.0)),
                )
                for s in obj["sequences"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed manifest: {exc}") from exc


@dataclass(frozen=True)
class FramePrediction:
    """Stored inference output for one frame."""

    timestamp_s: float
    labels: np.ndarray
    static_ini: np.ndarray
    static_new: np.ndarray
    moving_ini: np.ndarray
    moving_new: np.ndarray
    ego: EgoMotionState | None
    radar_motion: RadarMotion | None
    flagged: bool


def write_predictions(
    path: str | Path,
    sequence_name: str,
    window_length: int,
    predictions: Sequence[FramePrediction],
) -> None:
    header = {
        "format": PREDICTIONS_FORMAT,
        "version": PREDICTIONS_VERSION,
        "sequence": sequence_name,
        "window": window_length,
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for p in predictions:
        obj = {
            "t": float(p.timestamp_s),
            "labels": [int(x) for x in p.labels],
            "static_ini": [float(x) for x in p.static_ini],
            "static_new": [float(x) for x in p.static_new],
            "moving_ini": [float(x) for x in p.moving_ini],
            "moving_new": [float(x) for x in p.moving_new],
            "ego": None if p.ego is None else [p.ego.v_x_mps, p.ego.omega_radps],
            "radar_motion": (
                None
                if p.radar_motion is None
                else [p.radar_motion.v_x_mps, p.radar_motion.v_y_mps]
            ),
            "flagged": bool(p.flagged),
        }
        lines.append(json.dumps(obj, allow_nan=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n")


def read_predictions(path: str | Path) -> tuple[str, int, list[FramePrediction]]:
    """Returns (sequence_name, window_length, frame predictions)."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty predictions file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: not valid JSON: {exc}") from exc
    if header.get("format") != PREDICTIONS_FORMAT:
        raise FormatError(f"{path}: not a predictions file")
    if header.get("version") != PREDICTIONS_VERSION:
        raise FormatError(
            f"{path}: unsupported predictions version {header.get('version')!r}; "
            f"this build reads {PREDICTIONS_VERSION}"
        )
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            ego = obj["ego"]
            motion = obj["radar_motion"]
            out.append(
                FramePrediction(
                    float(obj["t"]),
                    np.array(obj["labels"], dtype=np.int8),
                    np.array(obj["static_ini"], dtype=float),
                    np.array(obj["static_new"], dtype=float),
                    np.array(obj["moving_ini"], dtype=float),
                    np.array(obj["moving_new"], dtype=float),
                    None if ego is None else EgoMotionState(float(ego[0]), float(ego[1])),
                    None
                    if motion is None
                    else RadarMotion(float(motion[0]), float(motion[1])),
                    bool(obj["flagged"]),
                )
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return str(header.get("sequence", "")), int(header.get("window", 0)), out
