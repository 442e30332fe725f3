"""Window inference: network scores refined by the motion solver.

The network's static scores seed a weighted velocity fit; Gaussian
re-weighting of the fit residuals gives the final static evidence, the
gate silences moving evidence on confidently static points, and a last
fit on the refined weights yields the ego-motion estimate.  None of
this feeds back into the network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..points import (
    EgoMotionState,
    FrameWindow,
    PointClass,
    PointWeights,
    RadarExtrinsics,
    RadarFrame,
    RadarMotion,
    sliding_windows,
)
from ..solver import (
    IllConditionedError,
    SolverConfig,
    UnderdeterminedError,
    gate_moving_weights,
    radar_to_vehicle,
    solve_wlsq,
    update_static_weights,
)
from .model import ModelParams, forward


@dataclass(frozen=True)
class InferenceResult:
    """Per-point labels and weights for one frame, plus the ego estimate.

    flagged marks frames where the velocity fit failed (too few or too
    collinear static points); such frames carry no motion estimate and
    their labels fall back to the raw network scores.
    """

    labels: np.ndarray
    weights: PointWeights
    radar_motion: RadarMotion | None
    ego: EgoMotionState | None
    flagged: bool


def refine_and_label(
    azimuths,
    radial_velocities,
    static_ini,
    moving_ini,
    extrinsics: RadarExtrinsics,
    config: SolverConfig | None = None,
) -> InferenceResult:
    """Solver-side half of inference, usable with any initial scores.

    Runs refine_iterations rounds of solve-then-reweight starting from
    static_ini, gates the moving scores with the final static weights,
    thresholds both into labels (static wins ties), and recomputes the
    velocity fit on the final weights for the ego estimate.
    """
    config = config or SolverConfig()
    az = np.asarray(azimuths, dtype=float)
    vr = np.asarray(radial_velocities, dtype=float)
    static_ini = np.asarray(static_ini, dtype=float)
    moving_ini = np.asarray(moving_ini, dtype=float)

    weights = static_ini
    flagged = False
    try:
        for _ in range(config.refine_iterations):
            motion = solve_wlsq(
                az, vr, weights, condition_limit=config.condition_limit
            )
            weights = update_static_weights(az, vr, motion, config.sigma_mps)
        static_new = weights
    except (UnderdeterminedError, IllConditionedError):
        flagged = True
        static_new = np.zeros_like(static_ini)

    radar_motion = None
    ego = None
    if not flagged:
        try:
            radar_motion = solve_wlsq(
                az, vr, static_new, condition_limit=config.condition_limit
            )
            ego = radar_to_vehicle(radar_motion, extrinsics)
        except (UnderdeterminedError, IllConditionedError):
            flagged = True
            radar_motion = None
            ego = None

    moving_new = gate_moving_weights(static_new, moving_ini, config.c_static)
    labels = np.full(az.shape[0], int(PointClass.FALSE_POSITIVE), dtype=np.int8)
    labels[moving_new > config.label_threshold] = int(PointClass.MOVING)
    labels[static_new > config.label_threshold] = int(PointClass.STATIC)
    return InferenceResult(
        labels,
        PointWeights(static_ini, static_new, moving_ini, moving_new),
        radar_motion,
        ego,
        flagged,
    )


def infer_window(
    window: FrameWindow,
    model: ModelParams,
    extrinsics: RadarExtrinsics,
    config: SolverConfig | None = None,
) -> InferenceResult:
    """Full inference for the last frame of a window."""
    static_ini, moving_ini = forward(window, model, training=False)
    last = window.last_frame
    return refine_and_label(
        last.azimuths, last.radial_velocities, static_ini, moving_ini,
        extrinsics, config,
    )


def infer_sequence(
    frames: list[RadarFrame],
    model: ModelParams,
    extrinsics: RadarExtrinsics,
    config: SolverConfig | None = None,
    window_length: int = 8,
) -> list[InferenceResult]:
    """One InferenceResult per frame.

    Frame k is predicted from the window of the window_length frames
    ending at k; the first window_length - 1 frames use the shorter
    window that is available.
    """
    if window_length < 1:
        raise ValueError("window_length must be at least 1")
    results = []
    for k in range(len(frames)):
        start = max(0, k + 1 - window_length)
        window = FrameWindow.from_frames(frames[start : k + 1])
        results.append(infer_window(window, model, extrinsics, config))
    return results
