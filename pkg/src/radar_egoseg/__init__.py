"""Radar point segmentation and single-scan ego-motion estimation.

The library covers the full pipeline: a synthetic scene simulator that
emits labeled Doppler radar sequences, a recurrent network that scores
each point as static or moving, a weighted least-squares sensor velocity
solver with Gaussian re-weighting, instance extraction over the moving
points, and the detection / odometry / trajectory metrics used to judge
the result.  The `radar-egoseg` command drives the same code end to end.
"""

from .config import DEFAULTS, ConfigError, RunConfig, load_config_file, resolve_config
from .instances import (
    NOISE,
    ClusterConfig,
    FrameAssociation,
    InstanceReport,
    associate,
    clusters_to_centroids,
    dbscan,
    match_moving_points,
)
from .metrics import (
    DetectionScores,
    SRmseConfig,
    detection_scores,
    rte_50,
    s_rmse,
    segment_endpoint_errors,
)
from .network import (
    InferenceResult,
    ModelConfig,
    ModelFileError,
    ModelParams,
    TrainConfig,
    TrainingDivergedError,
    TrainResult,
    WindowSample,
    build_training_set,
    forward,
    infer_sequence,
    infer_window,
    init_params,
    load_model,
    refine_and_label,
    save_model,
    train,
)
from .points import (
    FEATURE_NAMES,
    NO_INSTANCE,
    EgoMotionState,
    FrameWindow,
    GroundTruthLabels,
    PointClass,
    PointWeights,
    RadarExtrinsics,
    RadarFrame,
    RadarMotion,
    RadarPoint,
    Violation,
    cartesian_xy,
    sliding_windows,
    validate_frame,
    validate_sequence,
    wrap_angle,
)
from .reporting import (
    SequenceEvaluation,
    accumulate_static_map,
    aggregate_metrics,
    estimated_poses,
    evaluate_sequence,
    reference_poses,
    reference_states,
)
from .sequence_io import (
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
from .simulate import (
    SceneConfig,
    SimulatedSequence,
    apply_lifespan_filter,
    generate_gt_labels,
    observe_point,
    simulate_sequence,
)
from .solver import (
    DegenerateExtrinsicsError,
    IllConditionedError,
    SolverConfig,
    SolverError,
    TimedPose,
    UnderdeterminedError,
    advance_pose,
    doppler_residuals,
    gate_moving_weights,
    gaussian_weight_peak,
    integrate_trajectory,
    radar_to_vehicle,
    solve_wlsq,
    update_static_weights,
    vehicle_to_radar,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULTS",
    "ConfigError",
    "RunConfig",
    "load_config_file",
    "resolve_config",
    "NOISE",
    "ClusterConfig",
    "FrameAssociation",
    "InstanceReport",
    "associate",
    "clusters_to_centroids",
    "dbscan",
    "match_moving_points",
    "DetectionScores",
    "SRmseConfig",
    "detection_scores",
    "rte_50",
    "s_rmse",
    "segment_endpoint_errors",
    "InferenceResult",
    "ModelConfig",
    "ModelFileError",
    "ModelParams",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainResult",
    "WindowSample",
    "build_training_set",
    "forward",
    "infer_sequence",
    "infer_window",
    "init_params",
    "load_model",
    "refine_and_label",
    "save_model",
    "train",
    "FEATURE_NAMES",
    "NO_INSTANCE",
    "EgoMotionState",
    "FrameWindow",
    "GroundTruthLabels",
    "PointClass",
    "PointWeights",
    "RadarExtrinsics",
    "RadarFrame",
    "RadarMotion",
    "RadarPoint",
    "Violation",
    "cartesian_xy",
    "sliding_windows",
    "validate_frame",
    "validate_sequence",
    "wrap_angle",
    "SequenceEvaluation",
    "accumulate_static_map",
    "aggregate_metrics",
    "estimated_poses",
    "evaluate_sequence",
    "reference_poses",
    "reference_states",
    "DatasetManifest",
    "FormatError",
    "FramePrediction",
    "SequenceEntry",
    "read_manifest",
    "read_predictions",
    "read_sequence",
    "write_manifest",
    "write_predictions",
    "write_sequence",
    "SceneConfig",
    "SimulatedSequence",
    "apply_lifespan_filter",
    "generate_gt_labels",
    "observe_point",
    "simulate_sequence",
    "DegenerateExtrinsicsError",
    "IllConditionedError",
    "SolverConfig",
    "SolverError",
    "TimedPose",
    "UnderdeterminedError",
    "advance_pose",
    "doppler_residuals",
    "gate_moving_weights",
    "gaussian_weight_peak",
    "integrate_trajectory",
    "radar_to_vehicle",
    "solve_wlsq",
    "update_static_weights",
    "vehicle_to_radar",
    "__version__",
]
