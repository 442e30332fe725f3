"""Shared fixtures: tiny network configs and small simulated scenes."""

from __future__ import annotations

import numpy as np
import pytest

from radar_egoseg import (
    FrameWindow,
    GroundTruthLabels,
    ModelConfig,
    RadarFrame,
    SceneConfig,
    simulate_sequence,
)


@pytest.fixture(scope="session")
def tiny_model_config() -> ModelConfig:
    """Smallest config the layer stack supports, for gradient checks."""
    return ModelConfig(
        num_features=4,
        encoder_widths=(4, 4, 4),
        gru_hidden=8,
        decoder_widths=(4, 4, 4),
        head_widths=(4, 2, 1),
        dropout_rate=0.3,
    )


@pytest.fixture(scope="session")
def small_scene() -> SceneConfig:
    return SceneConfig(duration_s=1.5, moving_object_count=2)


@pytest.fixture(scope="session")
def short_sequence(small_scene):
    """One simulated sequence shared by read-only tests."""
    return simulate_sequence(small_scene, seed=11)


def random_frame(
    n: int,
    seed: int,
    t: float = 0.0,
    with_rcs: bool = True,
    with_gt: bool = False,
) -> RadarFrame:
    """A structurally valid frame with uniform random measurements."""
    rng = np.random.default_rng(seed)
    ranges = rng.uniform(1.0, 50.0, n)
    azimuths = rng.uniform(-np.pi, np.pi - 1e-9, n)
    vr = rng.uniform(-20.0, 20.0, n)
    rcs = rng.uniform(-10.0, 20.0, n) if with_rcs else None
    gt = None
    if with_gt:
        classes = rng.integers(0, 3, n).astype(np.int8)
        inst = np.where(classes == 1, rng.integers(0, 4, n), -1).astype(np.int64)
        gt = GroundTruthLabels(classes, inst)
    return RadarFrame(t, 0, ranges, azimuths, vr, rcs, gt, None)


def random_window(
    length: int, n: int, seed: int, with_gt: bool = True
) -> FrameWindow:
    """Window of equally sized random frames, all points real."""
    frames = [
        random_frame(n, seed + k, t=0.1 * k, with_gt=(with_gt and k == length - 1))
        for k in range(length)
    ]
    return FrameWindow.from_frames(frames)
