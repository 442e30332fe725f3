"""Deterministic Adam training with plateau decay and early stopping.

The training loss is the only schedule signal: the learning rate halves
after lr_patience epochs without improvement, and training stops early
after early_stop_patience such epochs or at max_epochs, whichever comes
first.  The returned parameters are the best-loss snapshot, not the
last.  Ego-motion estimation is not part of the loss; nothing from the
downstream solver is backpropagated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..points import FrameWindow, GroundTruthLabels, PointClass, RadarFrame, sliding_windows
from .model import ModelConfig, ModelParams, init_params, loss_and_gradients

BN_MOMENTUM = 0.1
#: Loss must drop by at least this much to count as improvement.
MIN_DELTA = 1e-9


class TrainingDivergedError(Exception):
    """Loss went non-finite; carries the epoch and learning rate."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule.

    All rates and counts must be positive; lr_decay lies in (0, 1).
    """

    batch_size: int = 64
    max_epochs: int = 400
    learning_rate: float = 0.001
    lr_decay: float = 0.5
    lr_patience: int = 5
    early_stop_patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_decay < 1:
            raise ValueError("lr_decay must lie in (0, 1)")
        if self.lr_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be positive")


@dataclass
class WindowSample:
    """One training example: a window plus last-frame targets."""

    features: np.ndarray  # (T, n, M)
    mask: np.ndarray  # (T, n) bool
    static_targets: np.ndarray  # (n,)
    moving_targets: np.ndarray  # (n,)
    sample_weight: float


@dataclass(frozen=True)
class TrainLogRow:
    epoch: int
    loss: float
    learning_rate: float


@dataclass
class TrainResult:
    model: ModelParams
    log: list[TrainLogRow]


def window_sample(
    window: FrameWindow,
    num_features: int,
    sequence_weight: float = 1.0,
    min_static_points: int = 10,
    low_static_factor: float = 0.1,
) -> WindowSample:
    """Build a training sample from a labeled window.

    The sample weight is the sequence weight, cut by low_static_factor
    when the last frame has fewer than min_static_points static points
    (so near-empty scenes cannot dominate the gradient).
    """
    gt = window.last_frame.gt
    if gt is None:
        raise ValueError("training windows need ground truth on the last frame")
    n = window.max_points
    static_t = np.zeros(n)
    moving_t = np.zeros(n)
    n_last = window.last_frame.num_points
    static_t[:n_last] = (gt.classes == PointClass.STATIC).astype(float)
    moving_t[:n_last] = (gt.classes == PointClass.MOVING).astype(float)
    weight = float(sequence_weight)
    if int(static_t.sum()) < min_static_points:
        weight *= low_static_factor
    return WindowSample(
        window.feature_array(num_features),
        np.asarray(window.mask, dtype=bool),
        static_t,
        moving_t,
        weight,
    )


def build_training_set(
    sequences: Sequence[Sequence[RadarFrame]],
    window_length: int,
    num_features: int,
    sequence_weights: Sequence[float] | None = None,
    min_static_points: int = 10,
    low_static_factor: float = 0.1,
) -> list[WindowSample]:
    """Slide full-length windows over every sequence."""
    if sequence_weights is None:
        sequence_weights = [1.0] * len(sequences)
    if len(sequence_weights) != len(sequences):
        raise ValueError("one weight per sequence required")
    samples = []
    for frames, weight in zip(sequences, sequence_weights):
        for window in sliding_windows(frames, window_length):
            samples.append(
                window_sample(
                    window, num_features, weight, min_static_points, low_static_factor
                )
            )
    return samples


def feature_stats(samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Mean and std of each feature over all real points."""
    rows = np.concatenate([s.features[s.mask] for s in samples], axis=0)
    if rows.shape[0] == 0:
        raise ValueError("training set contains no points")
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), 1e-6)
    return mean, std


def _collate(batch: Sequence[WindowSample]):
    t = batch[0].features.shape[0]
    n = max(s.features.shape[1] for s in batch)
    m = batch[0].features.shape[2]
    b = len(batch)
    features = np.zeros((b, t, n, m))
    mask = np.zeros((b, t, n), dtype=bool)
    static_t = np.zeros((b, n))
    moving_t = np.zeros((b, n))
    weights = np.zeros(b)
    for k, s in enumerate(batch):
        nw = s.features.shape[1]
        features[k, :, :nw] = s.features
        mask[k, :, :nw] = s.mask
        static_t[k, :nw] = s.static_targets
        moving_t[k, :nw] = s.moving_targets
        weights[k] = s.sample_weight
    return features, mask, static_t, moving_t, weights


class _Adam:
    """Plain Adam; iteration order fixed by the params dict order."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for key in params:
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            params[key] -= lr * (self.m[key] / c1) / (
                np.sqrt(self.v[key] / c2) + self.eps
            )


def train(
    dataset: Sequence[WindowSample],
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> TrainResult:
    """Fit the network; deterministic for fixed configs and dataset.

    Raises TrainingDivergedError if the epoch loss goes non-finite.
    """
    if not dataset:
        raise ValueError("training set is empty")
    model = init_params(model_config, train_config.seed)
    mean, std = feature_stats(dataset)
    model.state["feature_mean"] = mean
    model.state["feature_std"] = std

    rng = np.random.default_rng(train_config.seed)
    adam = _Adam(model.params)
    lr = train_config.learning_rate
    best_loss = math.inf
    best_model = model.copy()
    lr_stale = 0
    stop_stale = 0
    log: list[TrainLogRow] = []

    for epoch in range(1, train_config.max_epochs + 1):
        order = rng.permutation(len(dataset))
        total = 0.0
        seen = 0
        for start in range(0, len(dataset), train_config.batch_size):
            batch = [dataset[i] for i in order[start : start + train_config.batch_size]]
            arrays = _collate(batch)
            loss, grads, bn_updates = loss_and_gradients(
                model, *arrays, training=True, dropout_rng=rng
            )
            for prefix, mu, var in bn_updates:
                for stat, value in ((f"{prefix}_rmean", mu), (f"{prefix}_rvar", var)):
                    model.state[stat] = (
                        (1.0 - BN_MOMENTUM) * model.state[stat] + BN_MOMENTUM * value
                    )
            adam.step(model.params, grads, lr)
            total += loss * len(batch)
            seen += len(batch)
        epoch_loss = total / seen
        log.append(TrainLogRow(epoch, epoch_loss, lr))
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch} (lr {lr:g}); "
                "lower the learning rate or check the input scaling"
            )
        if epoch_loss < best_loss - MIN_DELTA:
            best_loss = epoch_loss
            best_model = model.copy()
            lr_stale = 0
            stop_stale = 0
        else:
            lr_stale += 1
            stop_stale += 1
            if lr_stale > train_config.lr_patience:
                lr *= train_config.lr_decay
                lr_stale = 0
            if stop_stale > train_config.early_stop_patience:
                break
    return TrainResult(best_model, log)
