"""Temporal segmentation network: model, training, files, inference."""

from .inference import InferenceResult, infer_sequence, infer_window, refine_and_label
from .model import (
    ModelConfig,
    ModelParams,
    assemble_batch,
    batch_forward,
    batch_loss,
    forward,
    gradients,
    init_params,
    prediction_loss,
)
from .modelfile import ModelFileError, load_model, save_model
from .training import (
    TrainConfig,
    TrainLogRow,
    TrainResult,
    TrainingDivergedError,
    WindowSample,
    build_training_set,
    train,
    window_sample,
)

__all__ = [
    "InferenceResult",
    "ModelConfig",
    "ModelFileError",
    "ModelParams",
    "TrainConfig",
    "TrainLogRow",
    "TrainResult",
    "TrainingDivergedError",
    "WindowSample",
    "assemble_batch",
    "batch_forward",
    "batch_loss",
    "build_training_set",
    "forward",
    "gradients",
    "infer_sequence",
    "infer_window",
    "init_params",
    "load_model",
    "prediction_loss",
    "refine_and_label",
    "save_model",
    "train",
    "window_sample",
]
