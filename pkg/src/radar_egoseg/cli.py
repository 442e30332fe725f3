"""Command-line interface.

Subcommands cover the full pipeline: simulate a labeled dataset,
relabel ground truth from odometry, train the segmentation network,
run inference, score predictions, and render an occupancy-style map.
All outputs are deterministic: rerunning a command with the same
inputs reproduces byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, RunConfig, resolve_config
from .figures import save_map_figure, save_training_curve, save_trajectory_overlay
from .network.inference import infer_sequence
from .network.modelfile import ModelFileError, load_model, save_model
from .network.training import TrainingDivergedError, build_training_set, train
from .points import PointClass, RadarExtrinsics, RadarFrame, validate_sequence
from .reporting import (
    accumulate_static_map,
    aggregate_metrics,
    estimated_poses,
    evaluate_sequence,
    reference_poses,
)
from .sequence_io import (
    METRICS_FORMAT,
    METRICS_VERSION,
    DatasetManifest,
    FormatError,
    FramePrediction,
    SequenceEntry,
    read_manifest,
    read_predictions,
    read_sequence,
    write_manifest,
    write_predictions,
    write_sequence,
)
from .simulate import apply_lifespan_filter, generate_gt_labels, simulate_sequence
from .solver import SolverError

log = logging.getLogger("radar_egoseg")

LOG_ENV = "RADAR_EGOSEG_LOG"


class CliError(Exception):
    """User-facing failure: bad arguments, missing files, bad data."""


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override one configuration value (repeatable)",
    )
    parser.add_argument("--seed", type=int, default=None, help="randomness seed")
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker threads for per-sequence work"
    )


def _run_config(args: argparse.Namespace) -> RunConfig:
    return resolve_config(args.config, args.overrides, args.seed)


def _parallel_map(fn, items, jobs: int) -> list:
    """Order-preserving map, threaded when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _float_text(value: float) -> str:
    return repr(float(value))


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    scene = cfg.scene_config()
    count = int(cfg["sim.sequences"])
    if count < 1:
        raise CliError("sim.sequences must be at least 1")
    min_life = int(cfg["gtlabel.min_lifespan_frames"])
    out = _out_dir(args)

    def build(index: int) -> list[RadarFrame]:
        sim = simulate_sequence(scene, seed=cfg.seed + index)
        return apply_lifespan_filter(sim.frames, min_life)

    sequences = _parallel_map(build, list(range(count)), args.jobs)
    entries = []
    for index, frames in enumerate(sequences):
        name = f"seq_{index:03d}"
        write_sequence(out / f"{name}.jsonl", frames)
        points = sum(f.num_points for f in frames)
        entries.append(SequenceEntry(f"{name}.jsonl", len(frames), points, 1.0))
        log.info("wrote %s: %d frames, %d points", name, len(frames), points)
    manifest = DatasetManifest(
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        extrinsics=cfg.extrinsics(),
        sequences=tuple(entries),
    )
    write_manifest(out / "manifest.json", manifest)
    total_points = sum(e.points for e in entries)
    print(f"wrote {count} sequences ({total_points} points) to {out}")
    return 0


def _read_odom_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read odometry CSV {path}: {exc}") from exc
    if table.shape[1] != 3:
        raise CliError(f"{path}: expected timestamp_s,v_x_mps,omega_radps columns")
    order = np.argsort(table[:, 0])
    table = table[order]
    return table[:, 0], table[:, 1], table[:, 2]


def _odom_for_frame(frame: RadarFrame, odom_table) -> "EgoMotionState":
    from .points import EgoMotionState

    if odom_table is None:
        if frame.odom is None:
            raise CliError(
                f"frame at t={frame.timestamp_s} has no odometry; pass --odom"
            )
        return frame.odom
    times, vx, omega = odom_table
    idx = int(np.searchsorted(times, frame.timestamp_s))
    best, best_err = None, np.inf
    for j in (idx - 1, idx):
        if 0 <= j < len(times):
            err = abs(times[j] - frame.timestamp_s)
            if err < best_err:
                best, best_err = j, err
    if best is None or best_err > 1e-6:
        raise CliError(f"no odometry row matches t={frame.timestamp_s}")
    return EgoMotionState(float(vx[best]), float(omega[best]))


def cmd_gt_label(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    extrinsics = cfg.extrinsics()
    threshold = cfg.gt_residual_threshold()
    min_life = int(cfg["gtlabel.min_lifespan_frames"])
    odom_table = _read_odom_csv(args.odom) if args.odom else None
    out = _out_dir(args)

    def relabel(path: str) -> tuple[str, int]:
        frames = read_sequence(path)
        validate_sequence(frames)
        relabeled = []
        for frame in frames:
            if frame.gt is None:
                raise CliError(
                    f"{path}: frame at t={frame.timestamp_s} has no annotations"
                )
            ego = _odom_for_frame(frame, odom_table)
            flags = frame.gt.classes == PointClass.MOVING
            gt = generate_gt_labels(
                frame, ego, extrinsics, threshold, flags, frame.gt.instance_ids
            )
            relabeled.append(frame.with_gt(gt))
        relabeled = apply_lifespan_filter(relabeled, min_life)
        name = Path(path).name
        write_sequence(out / name, relabeled)
        return name, len(relabeled)

    results = _parallel_map(relabel, list(args.inputs), args.jobs)
    for name, frames in results:
        print(f"relabeled {name}: {frames} frames")
    return 0


def _load_dataset(
    manifest_path: str,
) -> tuple[DatasetManifest, list[str], list[list[RadarFrame]]]:
    manifest = read_manifest(manifest_path)
    base = Path(manifest_path).parent
    names, sequences = [], []
    for entry in manifest.sequences:
        frames = read_sequence(base / entry.path)
        if len(frames) != entry.frames:
            raise CliError(
                f"{entry.path}: manifest lists {entry.frames} frames, "
                f"file has {len(frames)}"
            )
        names.append(Path(entry.path).stem)
        sequences.append(frames)
    return manifest, names, sequences


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    model_cfg = cfg.model_config()
    manifest, _, sequences = _load_dataset(args.data)
    weights = [entry.weight for entry in manifest.sequences]
    dataset = build_training_set(
        sequences,
        window_length=cfg.window_length,
        num_features=model_cfg.num_features,
        sequence_weights=weights,
        min_static_points=int(cfg["train.min_static_points"]),
        low_static_factor=float(cfg["train.low_static_factor"]),
    )
    if not dataset:
        raise CliError("no training windows: sequences shorter than the window")
    log.info("training on %d windows from %d sequences", len(dataset), len(sequences))
    result = train(dataset, model_cfg, cfg.train_config())
    out = _out_dir(args)
    save_model(out / "model.bin", result.model)
    rows = ["epoch,loss,learning_rate"]
    for entry in result.log:
        rows.append(
            f"{entry.epoch},{_float_text(entry.loss)},{_float_text(entry.learning_rate)}"
        )
    (out / "training_log.csv").write_text("\n".join(rows) + "\n")
    save_training_curve(
        out / "training_curve.svg",
        [entry.epoch for entry in result.log],
        [entry.loss for entry in result.log],
        [entry.learning_rate for entry in result.log],
    )
    best = min(entry.loss for entry in result.log)
    print(
        f"trained {result.model.param_count} parameters over "
        f"{len(result.log)} epochs, best loss {best:.6f}; model at {out / 'model.bin'}"
    )
    return 0


def _sequence_inputs(args: argparse.Namespace) -> tuple[
    list[str], list[list[RadarFrame]], RadarExtrinsics | None
]:
    """Sequences from --data manifest or bare --in files."""
    if args.data:
        manifest, names, sequences = _load_dataset(args.data)
        return names, sequences, manifest.extrinsics
    if not args.inputs:
        raise CliError("pass --data MANIFEST or sequence files")
    names, sequences = [], []
    for path in args.inputs:
        names.append(Path(path).stem)
        sequences.append(read_sequence(path))
    return names, sequences, None


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    model = load_model(args.model)
    names, sequences, manifest_ext = _sequence_inputs(args)
    extrinsics = manifest_ext if manifest_ext is not None else cfg.extrinsics()
    solver_cfg = cfg.solver_config()
    window = cfg.window_length
    out = _out_dir(args)

    def run(item: tuple[str, list[RadarFrame]]) -> str:
        name, frames = item
        results = infer_sequence(
            frames, model, extrinsics, config=solver_cfg, window_length=window
        )
        predictions = [
            FramePrediction(
                timestamp_s=frame.timestamp_s,
                labels=res.labels,
                static_ini=res.weights.static_ini,
                static_new=res.weights.static_new,
                moving_ini=res.weights.moving_ini,
                moving_new=res.weights.moving_new,
                ego=res.ego,
                radar_motion=res.radar_motion,
                flagged=res.flagged,
            )
            for frame, res in zip(frames, results)
        ]
        write_predictions(out / f"pred_{name}.jsonl", name, window, predictions)
        return name

    done = _parallel_map(run, list(zip(names, sequences)), args.jobs)
    print(f"wrote predictions for {len(done)} sequences to {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    names, sequences, _ = _sequence_inputs(args)
    cluster = cfg.cluster_config()
    srmse = cfg.srmse_config()
    segment_length = float(cfg["metrics.segment_length_m"])
    pred_dir = Path(args.pred)
    window_lengths = set()

    def score(item):
        name, frames = item
        path = pred_dir / f"pred_{name}.jsonl"
        if not path.exists():
            raise CliError(f"missing predictions file {path}")
        stored_name, window, predictions = read_predictions(path)
        if stored_name != name:
            raise CliError(
                f"{path}: stores sequence {stored_name!r}, expected {name!r}"
            )
        window_lengths.add(window)
        return evaluate_sequence(name, frames, predictions, cluster, segment_length)

    evaluations = _parallel_map(score, list(zip(names, sequences)), args.jobs)
    window = max(window_lengths) if window_lengths else cfg.window_length
    payload = {
        "format": METRICS_FORMAT,
        "version": METRICS_VERSION,
        **aggregate_metrics(evaluations, srmse, window, segment_length),
    }
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)

    def show(value):
        return "n/a" if value is None else f"{value:.4f}"

    print(
        "fdr={} mdr={} f1={} iou={} s_rmse_vx={} s_rmse_omega={} rte_50={}".format(
            show(payload["fdr"]),
            show(payload["mdr"]),
            show(payload["f1"]),
            show(payload["iou"]),
            show(payload["s_rmse_vx_cm_s"]),
            show(payload["s_rmse_omega_deg_s"]),
            show(payload["rte_50_m"]),
        )
    )
    return 0


def cmd_map(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    frames = read_sequence(args.seq)
    validate_sequence(frames)
    name, _, predictions = read_predictions(args.pred)
    if len(predictions) != len(frames):
        raise CliError(
            f"{args.pred}: {len(predictions)} predictions for "
            f"{len(frames)} frames in {args.seq}"
        )
    if args.data:
        extrinsics = read_manifest(args.data).extrinsics
    else:
        extrinsics = cfg.extrinsics()
    reference = reference_poses(frames)
    if reference is None:
        raise CliError(f"{args.seq}: sequence carries no odometry")
    estimated = estimated_poses(frames, predictions)
    static_xy = accumulate_static_map(frames, predictions, extrinsics, estimated)
    out = _out_dir(args)

    map_rows = ["x_m,y_m"]
    for x, y in static_xy:
        map_rows.append(f"{_float_text(x)},{_float_text(y)}")
    (out / "map.csv").write_text("\n".join(map_rows) + "\n")

    traj_rows = [
        "timestamp_s,ref_x_m,ref_y_m,ref_heading_rad,est_x_m,est_y_m,est_heading_rad"
    ]
    for ref, est in zip(reference, estimated):
        traj_rows.append(
            ",".join(
                _float_text(v)
                for v in (
                    ref.t_s, ref.x_m, ref.y_m, ref.heading_rad,
                    est.x_m, est.y_m, est.heading_rad,
                )
            )
        )
    (out / "trajectory.csv").write_text("\n".join(traj_rows) + "\n")

    save_map_figure(out / "map.svg", static_xy, reference, estimated)
    save_trajectory_overlay(out / "trajectory.svg", reference, estimated)
    print(
        f"mapped {len(static_xy)} static points over {len(frames)} frames "
        f"of {name}; figures in {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radar-egoseg",
        description=(
            "Radar point segmentation and single-scan ego-motion estimation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gt-label", help="relabel ground truth from odometry")
    _add_common(p)
    p.add_argument("inputs", nargs="+", metavar="SEQ", help="sequence files")
    p.add_argument("--odom", metavar="CSV", help="external odometry table")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_gt_label)

    p = sub.add_parser("train", help="train the segmentation network")
    _add_common(p)
    p.add_argument("--data", required=True, metavar="MANIFEST", help="dataset manifest")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="run inference over sequences")
    _add_common(p)
    p.add_argument("inputs", nargs="*", metavar="SEQ", help="sequence files")
    p.add_argument("--data", metavar="MANIFEST", help="dataset manifest")
    p.add_argument("--model", required=True, metavar="FILE", help="trained model")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    _add_common(p)
    p.add_argument("inputs", nargs="*", metavar="SEQ", help="sequence files")
    p.add_argument("--data", metavar="MANIFEST", help="dataset manifest")
    p.add_argument("--pred", required=True, metavar="DIR", help="predictions directory")
    p.add_argument("--out", required=True, metavar="FILE", help="metrics JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("map", help="render the static map and trajectories")
    _add_common(p)
    p.add_argument("--seq", required=True, metavar="SEQ", help="sequence file")
    p.add_argument("--pred", required=True, metavar="FILE", help="predictions file")
    p.add_argument("--data", metavar="MANIFEST", help="manifest for the mount pose")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_map)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        ConfigError,
        FormatError,
        ModelFileError,
        TrainingDivergedError,
        SolverError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
