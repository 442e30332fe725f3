"""Flat key=value run configuration shared by all CLI commands.

One namespace of dotted keys covers the simulator, network, solver,
clustering, and metrics.  Values come from, in rising precedence:
built-in defaults, a configuration file of `key = value` lines, and
`--set key=value` command-line overrides.  Every key is typed by its
default; unknown keys and unparseable values are rejected loudly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from .instances import ClusterConfig
from .metrics import SRmseConfig
from .network.model import ModelConfig
from .network.training import TrainConfig
from .points import RadarExtrinsics
from .simulate import SceneConfig
from .solver import SolverConfig


class ConfigError(Exception):
    """Bad key, bad value, or unreadable configuration file."""


DEFAULTS: dict[str, object] = {
    "seed": 0,
    "window": 8,
    # Scene generation.
    "sim.sequences": 5,
    "sim.duration_s": 8.0,
    "sim.frame_rate_hz": 16.7,
    "sim.landmark_density_per_m": 1.0,
    "sim.road_half_width_m": 4.0,
    "sim.moving_object_count": 4,
    "sim.moving_speed_range_mps": (1.0, 8.0),
    "sim.moving_points_mean": 6.0,
    "sim.moving_extent_m": 0.8,
    "sim.moving_along_road_fraction": 0.7,
    "sim.false_positive_rate_per_frame": 3.0,
    "sim.fp_near_profile_fraction": 0.5,
    "sim.fp_near_profile_offset_mps": (0.5, 6.0),
    "sim.ghost_rate_per_frame": 0.0,
    "sim.ghost_points_mean": 3.0,
    "sim.ghost_extent_m": 1.0,
    "sim.ghost_lifetime_frames": (1, 2),
    "sim.ghost_offset_mps": (0.35, 1.3),
    "sim.ghost_clearance_m": 6.0,
    "sim.doppler_span_mps": 15.0,
    "sim.noise_sigma_vr_mps": 0.013,
    "sim.noise_sigma_range_m": 0.05,
    "sim.noise_sigma_azimuth_rad": 0.003,
    "sim.fov_max_range_m": 40.0,
    "sim.fov_min_range_m": 1.0,
    "sim.fov_half_angle_rad": math.radians(60.0),
    "sim.ego_profile": "4.0:10.0:0.0,4.0:10.0:0.12",
    "sim.gt_static_threshold_mps": -1.0,  # negative = 3 * noise sigma
    # Radar mount pose in the vehicle frame.
    "ext.x_m": 3.5,
    "ext.y_m": 0.0,
    "ext.theta_rad": 0.0,
    # Ground-truth relabeling.
    "gtlabel.residual_threshold_mps": -1.0,  # negative = 3 * sim noise sigma
    "gtlabel.min_lifespan_frames": 5,
    # Network shape.
    "model.num_features": 4,
    "model.encoder_widths": (32, 64, 128),
    "model.gru_hidden": 128,
    "model.decoder_widths": (128, 64, 32),
    "model.head_widths": (32, 16, 1),
    "model.dropout_rate": 0.3,
    # Optimization.
    "train.batch_size": 64,
    "train.max_epochs": 400,
    "train.learning_rate": 0.001,
    "train.lr_decay": 0.5,
    "train.lr_patience": 5,
    "train.early_stop_patience": 10,
    "train.min_static_points": 10,
    "train.low_static_factor": 0.1,
    # Motion solver and labeling thresholds.
    "solver.sigma_mps": 0.013,
    "solver.c_static": 0.1,
    "solver.label_threshold": 0.1,
    "solver.condition_limit": 1e8,
    "solver.refine_iterations": 1,
    # Instance clustering and association.
    "cluster.eps_m": 2.0,
    "cluster.min_pts": 2,
    "cluster.gate_m": 2.5,
    # Metric saturation and segmenting.
    "metrics.speed_c_err_cm_s": 50.0,
    "metrics.speed_s_cm_s": 50.0,
    "metrics.omega_c_err_deg_s": 2.86,
    "metrics.omega_s_deg_s": 2.86,
    "metrics.segment_length_m": 50.0,
}


def _parse_value(key: str, text: str):
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError("expected a boolean")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            element = int if isinstance(default[0], int) else float
            return tuple(element(part) for part in text.split(","))
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc


def _parse_ego_profile(text: str) -> tuple[tuple[float, float, float], ...]:
    segments = []
    for part in text.split(","):
        fields = part.split(":")
        if len(fields) != 3:
            raise ConfigError(
                "sim.ego_profile segments must be duration:speed:yaw_rate"
            )
        try:
            segments.append(tuple(float(f) for f in fields))
        except ValueError as exc:
            raise ConfigError(f"bad sim.ego_profile segment {part!r}") from exc
    return tuple(segments)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration values for one command invocation."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def window_length(self) -> int:
        return int(self.values["window"])

    def config_hash(self) -> str:
        lines = [f"{k}={self.values[k]!r}" for k in sorted(self.values)]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()

    def extrinsics(self) -> RadarExtrinsics:
        return RadarExtrinsics(
            self.values["ext.x_m"], self.values["ext.y_m"], self.values["ext.theta_rad"]
        )

    def scene_config(self) -> SceneConfig:
        v = self.values
        try:
            return SceneConfig(
                duration_s=v["sim.duration_s"],
                frame_rate_hz=v["sim.frame_rate_hz"],
                landmark_density_per_m=v["sim.landmark_density_per_m"],
                road_half_width_m=v["sim.road_half_width_m"],
                moving_object_count=v["sim.moving_object_count"],
                moving_speed_range_mps=v["sim.moving_speed_range_mps"],
                moving_points_mean=v["sim.moving_points_mean"],
                moving_extent_m=v["sim.moving_extent_m"],
                moving_along_road_fraction=v["sim.moving_along_road_fraction"],
                false_positive_rate_per_frame=v["sim.false_positive_rate_per_frame"],
                fp_near_profile_fraction=v["sim.fp_near_profile_fraction"],
                fp_near_profile_offset_mps=v["sim.fp_near_profile_offset_mps"],
                ghost_rate_per_frame=v["sim.ghost_rate_per_frame"],
                ghost_points_mean=v["sim.ghost_points_mean"],
                ghost_extent_m=v["sim.ghost_extent_m"],
                ghost_lifetime_frames=v["sim.ghost_lifetime_frames"],
                ghost_offset_mps=v["sim.ghost_offset_mps"],
                ghost_clearance_m=v["sim.ghost_clearance_m"],
                doppler_span_mps=v["sim.doppler_span_mps"],
                noise_sigma_vr_mps=v["sim.noise_sigma_vr_mps"],
                noise_sigma_range_m=v["sim.noise_sigma_range_m"],
                noise_sigma_azimuth_rad=v["sim.noise_sigma_azimuth_rad"],
                fov_max_range_m=v["sim.fov_max_range_m"],
                fov_min_range_m=v["sim.fov_min_range_m"],
                fov_half_angle_rad=v["sim.fov_half_angle_rad"],
                extrinsics=self.extrinsics(),
                ego_profile=_parse_ego_profile(v["sim.ego_profile"]),
                gt_static_threshold_mps=(
                    None
                    if v["sim.gt_static_threshold_mps"] < 0
                    else v["sim.gt_static_threshold_mps"]
                ),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def gt_residual_threshold(self) -> float:
        value = float(self.values["gtlabel.residual_threshold_mps"])
        if value < 0:
            return 3.0 * float(self.values["sim.noise_sigma_vr_mps"])
        return value

    def model_config(self) -> ModelConfig:
        v = self.values
        try:
            return ModelConfig(
                num_features=v["model.num_features"],
                encoder_widths=v["model.encoder_widths"],
                gru_hidden=v["model.gru_hidden"],
                decoder_widths=v["model.decoder_widths"],
                head_widths=v["model.head_widths"],
                dropout_rate=v["model.dropout_rate"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        v = self.values
        try:
            return TrainConfig(
                batch_size=v["train.batch_size"],
                max_epochs=v["train.max_epochs"],
                learning_rate=v["train.learning_rate"],
                lr_decay=v["train.lr_decay"],
                lr_patience=v["train.lr_patience"],
                early_stop_patience=v["train.early_stop_patience"],
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_config(self) -> SolverConfig:
        v = self.values
        try:
            return SolverConfig(
                sigma_mps=v["solver.sigma_mps"],
                c_static=v["solver.c_static"],
                label_threshold=v["solver.label_threshold"],
                condition_limit=v["solver.condition_limit"],
                refine_iterations=v["solver.refine_iterations"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def cluster_config(self) -> ClusterConfig:
        v = self.values
        try:
            return ClusterConfig(
                eps_m=v["cluster.eps_m"],
                min_pts=v["cluster.min_pts"],
                gate_m=v["cluster.gate_m"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def srmse_config(self) -> SRmseConfig:
        v = self.values
        try:
            return SRmseConfig(
                speed_c_err_cm_s=v["metrics.speed_c_err_cm_s"],
                speed_s_cm_s=v["metrics.speed_s_cm_s"],
                omega_c_err_deg_s=v["metrics.omega_c_err_deg_s"],
                omega_s_deg_s=v["metrics.omega_s_deg_s"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_config_file(path: str | Path) -> dict[str, object]:
    """Parse `key = value` lines; # starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, text_value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
        values[key] = _parse_value(key, text_value)
    return values


def resolve_config(
    config_path: str | Path | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> RunConfig:
    """Defaults, then file values, then --set overrides, then --seed."""
    values = dict(DEFAULTS)
    if config_path is not None:
        values.update(load_config_file(config_path))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, text_value = (part.strip() for part in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[key] = _parse_value(key, text_value)
    if seed is not None:
        values["seed"] = int(seed)
    return RunConfig(values)
