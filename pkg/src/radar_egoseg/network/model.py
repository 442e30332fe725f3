"""Temporal point-cloud segmentation network, written out by hand.

Per frame, a shared pointwise MLP encodes every detection and a masked
average pool summarizes the frame; a GRU carries the frame summaries
across the window; the decoder concatenates each last-frame detection's
raw features, its early encoder activations, and the GRU state, and two
small heads emit per-detection static and moving scores in [0, 1].
Predictions are produced for the last frame of the window only.

Everything runs in float64 numpy with explicit backward passes, so
gradients are exact and training is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..points import FrameWindow, GroundTruthLabels, PointClass
from .layers import (
    batchnorm_backward,
    batchnorm_forward,
    gru_backward,
    gru_forward,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
    segment_sums,
    sigmoid,
)

#: Probabilities are clamped to [EPS_PROB, 1 - EPS_PROB] inside the loss.
EPS_PROB = 1e-7


@dataclass(frozen=True)
class ModelConfig:
    """Network shape.

    encoder_widths are the three shared per-point layers, gru_hidden the
    temporal state size, decoder_widths the three per-point layers after
    the skip concatenation, head_widths the per-head stack ending in one
    sigmoid channel.
    """

    num_features: int = 4
    encoder_widths: tuple[int, int, int] = (32, 64, 128)
    gru_hidden: int = 128
    decoder_widths: tuple[int, int, int] = (128, 64, 32)
    head_widths: tuple[int, int, int] = (32, 16, 1)
    dropout_rate: float = 0.3

    def __post_init__(self):
        if self.num_features not in (3, 4):
            raise ValueError("num_features must be 3 or 4")
        for name in ("encoder_widths", "decoder_widths", "head_widths"):
            widths = getattr(self, name)
            if len(widths) != 3 or any(w < 1 for w in widths):
                raise ValueError(f"{name} must be three positive integers")
        if self.head_widths[-1] != 1:
            raise ValueError("head_widths must end in 1")
        if self.gru_hidden < 1:
            raise ValueError("gru_hidden must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def decoder_input_width(self) -> int:
        return (
            self.num_features
            + self.encoder_widths[0]
            + self.encoder_widths[1]
            + self.gru_hidden
        )


@dataclass
class ModelParams:
    """Learnable arrays plus non-learnable normalization state.

    params holds weights, biases, and batch-norm scale/shift; state
    holds the input feature statistics and batch-norm running moments.
    Keys are stable, which fixes the optimizer iteration order and the
    on-disk layout.
    """

    config: ModelConfig
    params: dict[str, np.ndarray]
    state: dict[str, np.ndarray]

    @property
    def param_count(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.state.items()},
        )


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Fresh parameters; He init for ReLU layers, uniform for the GRU."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    state: dict[str, np.ndarray] = {}

    def bn_layer(prefix, width):
        params[f"{prefix}_gamma"] = np.ones(width)
        params[f"{prefix}_beta"] = np.zeros(width)
        state[f"{prefix}_rmean"] = np.zeros(width)
        state[f"{prefix}_rvar"] = np.ones(width)

    c_in = config.num_features
    for i, width in enumerate(config.encoder_widths):
        params[f"enc{i}_w"] = rng.normal(0.0, np.sqrt(2.0 / c_in), (c_in, width))
        params[f"enc{i}_b"] = np.zeros(width)
        bn_layer(f"enc{i}", width)
        c_in = width

    hidden = config.gru_hidden
    k = 1.0 / np.sqrt(hidden)
    params["gru_w_ih"] = rng.uniform(-k, k, (3 * hidden, config.encoder_widths[-1]))
    params["gru_w_hh"] = rng.uniform(-k, k, (3 * hidden, hidden))
    params["gru_b_ih"] = rng.uniform(-k, k, 3 * hidden)
    params["gru_b_hh"] = rng.uniform(-k, k, 3 * hidden)

    c_in = config.decoder_input_width
    for i, width in enumerate(config.decoder_widths):
        params[f"dec{i}_w"] = rng.normal(0.0, np.sqrt(2.0 / c_in), (c_in, width))
        params[f"dec{i}_b"] = np.zeros(width)
        bn_layer(f"dec{i}", width)
        c_in = width

    for head in ("static", "moving"):
        c_in = config.decoder_widths[-1]
        for i, width in enumerate(config.head_widths):
            gain = 2.0 if i < 2 else 1.0
            params[f"{head}{i}_w"] = rng.normal(
                0.0, np.sqrt(gain / c_in), (c_in, width)
            )
            params[f"{head}{i}_b"] = np.zeros(width)
            c_in = width

    state["feature_mean"] = np.zeros(config.num_features)
    state["feature_std"] = np.ones(config.num_features)
    return ModelParams(config, params, state)


@dataclass
class ForwardResult:
    """Padded per-point scores for the last window frame plus the
    backward cache."""

    static_p: np.ndarray  # (B, N), zeros at masked positions
    moving_p: np.ndarray
    cache: dict


def _mlp_block_forward(x, p, state, prefix, training):
    """linear -> batch norm -> relu, returning (out, cache, bn_stats)."""
    z, lin_cache = linear_forward(x, p[f"{prefix}_w"], p[f"{prefix}_b"])
    z, bn_cache, stats = batchnorm_forward(
        z,
        p[f"{prefix}_gamma"],
        p[f"{prefix}_beta"],
        state[f"{prefix}_rmean"],
        state[f"{prefix}_rvar"],
        training,
    )
    out, relu_cache = relu_forward(z)
    return out, (lin_cache, bn_cache, relu_cache), stats


def _mlp_block_backward(dy, cache, prefix, grads):
    lin_cache, bn_cache, relu_cache = cache
    dy = relu_backward(dy, relu_cache)
    dy, dgamma, dbeta = batchnorm_backward(dy, bn_cache)
    dy, dw, db = linear_backward(dy, lin_cache)
    grads[f"{prefix}_gamma"] += dgamma
    grads[f"{prefix}_beta"] += dbeta
    grads[f"{prefix}_w"] += dw
    grads[f"{prefix}_b"] += db
    return dy


def _head_forward(x, p, head):
    caches = []
    h = x
    for i in range(2):
        h, lin_cache = linear_forward(h, p[f"{head}{i}_w"], p[f"{head}{i}_b"])
        h, relu_cache = relu_forward(h)
        caches.append((lin_cache, relu_cache))
    logit, lin_cache = linear_forward(h, p[f"{head}2_w"], p[f"{head}2_b"])
    caches.append((lin_cache, None))
    return logit[:, 0], caches


def _head_backward(dlogit, caches, p, head, grads):
    dy = dlogit[:, None]
    lin_cache, _ = caches[2]
    dy, dw, db = linear_backward(dy, lin_cache)
    grads[f"{head}2_w"] += dw
    grads[f"{head}2_b"] += db
    for i in (1, 0):
        lin_cache, relu_cache = caches[i]
        dy = relu_backward(dy, relu_cache)
        dy, dw, db = linear_backward(dy, lin_cache)
        grads[f"{head}{i}_w"] += dw
        grads[f"{head}{i}_b"] += db
    return dy


def batch_forward(
    features: np.ndarray,
    mask: np.ndarray,
    model: ModelParams,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> ForwardResult:
    """Run the network on a padded batch.

    features is (B, T, N, num_features) with zeros at padded positions,
    mask is (B, T, N) marking real points.  Dropout draws come from
    dropout_rng and are consumed only in training mode; one mask per
    window, shared across that window's points.
    """
    cfg = model.config
    p = model.params
    state = model.state
    b, t, n, m = features.shape
    if m != cfg.num_features:
        raise ValueError(f"expected {cfg.num_features} features, got {m}")
    if mask.shape != (b, t, n):
        raise ValueError("mask shape must match features")
    if training and cfg.dropout_rate > 0 and dropout_rng is None:
        raise ValueError("training-mode forward needs a dropout generator")
    mask = mask.astype(bool)
    counts = mask.sum(axis=2).reshape(b * t).astype(np.int64)
    seg_of_row = np.repeat(np.arange(b * t), counts)
    rows = features[mask]
    if rows.shape[0] == 0:
        raise ValueError("batch contains no real points")
    xn = (rows - state["feature_mean"]) / state["feature_std"]

    bn_updates = []
    enc_caches = []
    h = xn
    enc_acts = []
    for i in range(3):
        h, cache, stats = _mlp_block_forward(h, p, state, f"enc{i}", training)
        enc_caches.append(cache)
        enc_acts.append(h)
        if stats is not None:
            bn_updates.append((f"enc{i}", *stats))
    h1, h2, h3 = enc_acts

    denom = np.maximum(counts, 1).astype(float)
    pooled = segment_sums(h3, counts) / denom[:, None]
    gru_in = pooled.reshape(b, t, -1)
    h_t, gru_cache = gru_forward(
        gru_in, p["gru_w_ih"], p["gru_w_hh"], p["gru_b_ih"], p["gru_b_hh"]
    )

    last_sel = (seg_of_row % t) == (t - 1)
    row_b = seg_of_row[last_sel] // t
    counts_last = counts.reshape(b, t)[:, -1]
    dec_in = np.concatenate(
        [xn[last_sel], h1[last_sel], h2[last_sel], h_t[row_b]], axis=1
    )

    dec_caches = []
    d = dec_in
    drop_rows = None
    for i in range(3):
        d, cache, stats = _mlp_block_forward(d, p, state, f"dec{i}", training)
        dec_caches.append(cache)
        if stats is not None:
            bn_updates.append((f"dec{i}", *stats))
        if i == 1 and training and cfg.dropout_rate > 0:
            keep = 1.0 - cfg.dropout_rate
            window_mask = (
                dropout_rng.random((b, d.shape[1])) < keep
            ).astype(float) / keep
            drop_rows = window_mask[row_b]
            d = d * drop_rows

    ps_rows, head_s_cache = _head_forward(d, p, "static")
    pm_rows, head_m_cache = _head_forward(d, p, "moving")
    ps_rows = sigmoid(ps_rows)
    pm_rows = sigmoid(pm_rows)

    static_p = np.zeros((b, n))
    moving_p = np.zeros((b, n))
    mask_last = mask[:, t - 1, :]
    static_p[mask_last] = ps_rows
    moving_p[mask_last] = pm_rows

    cache = {
        "shape": (b, t, n),
        "counts": counts,
        "seg_of_row": seg_of_row,
        "last_sel": last_sel,
        "row_b": row_b,
        "counts_last": counts_last,
        "enc_caches": enc_caches,
        "gru_cache": gru_cache,
        "dec_caches": dec_caches,
        "drop_rows": drop_rows,
        "head_s_cache": head_s_cache,
        "head_m_cache": head_m_cache,
        "ps_rows": ps_rows,
        "pm_rows": pm_rows,
        "bn_updates": bn_updates,
        "model": model,
    }
    return ForwardResult(static_p, moving_p, cache)


def batch_backward(cache: dict, dlogit_static, dlogit_moving) -> dict[str, np.ndarray]:
    """Gradients of all learnable arrays given head logit gradients."""
    model: ModelParams = cache["model"]
    p = model.params
    b, t, n = cache["shape"]
    grads = {k: np.zeros_like(v) for k, v in p.items()}

    dd = _head_backward(dlogit_static, cache["head_s_cache"], p, "static", grads)
    dd += _head_backward(dlogit_moving, cache["head_m_cache"], p, "moving", grads)

    for i in (2, 1, 0):
        dd = _mlp_block_backward(dd, cache["dec_caches"][i], f"dec{i}", grads)
        if i == 2 and cache["drop_rows"] is not None:
            dd = dd * cache["drop_rows"]

    cfg = model.config
    m = cfg.num_features
    w0, w1 = cfg.encoder_widths[0], cfg.encoder_widths[1]
    dh1_last = dd[:, m : m + w0]
    dh2_last = dd[:, m + w0 : m + w0 + w1]
    dht_rows = dd[:, m + w0 + w1 :]

    dht = segment_sums(dht_rows, cache["counts_last"])
    dgru_in, dw_ih, dw_hh, db_ih, db_hh = gru_backward(dht, cache["gru_cache"])
    grads["gru_w_ih"] += dw_ih
    grads["gru_w_hh"] += dw_hh
    grads["gru_b_ih"] += db_ih
    grads["gru_b_hh"] += db_hh

    counts = cache["counts"]
    seg_of_row = cache["seg_of_row"]
    dg_flat = dgru_in.reshape(b * t, -1)
    denom = np.maximum(counts, 1).astype(float)
    dh3 = dg_flat[seg_of_row] / denom[seg_of_row][:, None]

    last_sel = cache["last_sel"]
    dh = _mlp_block_backward(dh3, cache["enc_caches"][2], "enc2", grads)
    dh[last_sel] += dh2_last
    dh = _mlp_block_backward(dh, cache["enc_caches"][1], "enc1", grads)
    dh[last_sel] += dh1_last
    _mlp_block_backward(dh, cache["enc_caches"][0], "enc0", grads)
    return grads


def _bce_rows(p_rows, targets, row_factor):
    """Clamped binary cross-entropy over rows.

    Returns the summed weighted loss and the exact gradient with respect
    to the pre-sigmoid logits (zero where the clamp is active).
    """
    pc = np.clip(p_rows, EPS_PROB, 1.0 - EPS_PROB)
    losses = -(targets * np.log(pc) + (1.0 - targets) * np.log(1.0 - pc))
    inside = (p_rows > EPS_PROB) & (p_rows < 1.0 - EPS_PROB)
    dlogit = row_factor * (p_rows - targets) * inside
    return float(np.sum(row_factor * losses)), dlogit


def loss_and_gradients(
    model: ModelParams,
    features: np.ndarray,
    mask: np.ndarray,
    static_targets: np.ndarray,
    moving_targets: np.ndarray,
    sample_weights: np.ndarray,
    training: bool = True,
    dropout_rng: np.random.Generator | None = None,
):
    """Batch loss and parameter gradients in one pass.

    Targets are padded (B, N) arrays read at the last-frame mask.  Each
    window's two cross-entropies are averaged over its real points,
    scaled by its sample weight, and the batch is averaged uniformly.
    Returns (loss, grads, bn_updates); bn_updates carries the batch
    moments for the caller to fold into the running statistics.
    """
    res = batch_forward(features, mask, model, training, dropout_rng)
    cache = res.cache
    b, t, n = cache["shape"]
    row_b = cache["row_b"]
    counts_last = cache["counts_last"]
    mask_last = mask[:, t - 1, :].astype(bool)
    ts = static_targets[mask_last].astype(float)
    tm = moving_targets[mask_last].astype(float)
    sw = np.asarray(sample_weights, dtype=float)
    row_factor = sw[row_b] / (b * np.maximum(counts_last, 1)[row_b])
    loss_s, dlog_s = _bce_rows(cache["ps_rows"], ts, row_factor)
    loss_m, dlog_m = _bce_rows(cache["pm_rows"], tm, row_factor)
    grads = batch_backward(cache, dlog_s, dlog_m)
    return loss_s + loss_m, grads, cache["bn_updates"]


def forward(
    window: FrameWindow,
    model: ModelParams,
    training: bool = False,
    seed: int = 0,
):
    """Scores for the real points of the window's last frame.

    Returns (static_ini, moving_ini), both in [0, 1], one value per real
    point in last-frame order.  Deterministic given (window, model,
    training, seed); the seed only feeds dropout and matters only in
    training mode.
    """
    features = window.feature_array(model.config.num_features)[None]
    mask = window.mask[None]
    rng = np.random.default_rng(seed)
    res = batch_forward(features, mask, model, training, rng)
    n_last = window.last_frame.num_points
    return res.static_p[0, :n_last].copy(), res.moving_p[0, :n_last].copy()


def prediction_loss(
    static_ini,
    moving_ini,
    gt: GroundTruthLabels,
    sample_weight: float = 1.0,
) -> float:
    """Clamped dual cross-entropy of one frame's predictions.

    The static target is 1 exactly for STATIC points and the moving
    target 1 exactly for MOVING points; both losses are averaged over
    the frame's points and the sum is scaled by sample_weight.
    """
    ps = np.asarray(static_ini, dtype=float)
    pm = np.asarray(moving_ini, dtype=float)
    if ps.shape != pm.shape or ps.ndim != 1:
        raise ValueError("predictions must be parallel 1-D arrays")
    if len(gt) != ps.shape[0]:
        raise ValueError("ground truth must parallel the predictions")
    if ps.shape[0] == 0:
        return 0.0
    ts = (gt.classes == PointClass.STATIC).astype(float)
    tm = (gt.classes == PointClass.MOVING).astype(float)
    factor = np.full(ps.shape[0], sample_weight / ps.shape[0])
    loss_s, _ = _bce_rows(ps, ts, factor)
    loss_m, _ = _bce_rows(pm, tm, factor)
    return loss_s + loss_m


def targets_from_gt(gt: GroundTruthLabels) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (static, moving) 0/1 targets for one frame."""
    return (
        (gt.classes == PointClass.STATIC).astype(float),
        (gt.classes == PointClass.MOVING).astype(float),
    )


def assemble_batch(
    items: Sequence[tuple[FrameWindow, GroundTruthLabels, float]],
    num_features: int,
):
    """Pad windows of equal length into one batch of arrays.

    Each item is (window, last-frame ground truth, sample weight).
    Returns (features, mask, static_targets, moving_targets, weights)
    shaped for loss_and_gradients.
    """
    if not items:
        raise ValueError("batch must be nonempty")
    t = items[0][0].length
    if any(w.length != t for w, _, _ in items):
        raise ValueError("all windows in a batch must have equal length")
    n = max(w.max_points for w, _, _ in items)
    b = len(items)
    features = np.zeros((b, t, n, num_features))
    mask = np.zeros((b, t, n), dtype=bool)
    static_t = np.zeros((b, n))
    moving_t = np.zeros((b, n))
    weights = np.zeros(b)
    for k, (window, gt, sw) in enumerate(items):
        if len(gt) != window.last_frame.num_points:
            raise ValueError("ground truth must match the window's last frame")
        nw = window.max_points
        features[k, :, :nw] = window.feature_array(num_features)
        mask[k, :, :nw] = window.mask
        ts, tm = targets_from_gt(gt)
        n_last = window.last_frame.num_points
        static_t[k, :n_last] = ts
        moving_t[k, :n_last] = tm
        weights[k] = sw
    return features, mask, static_t, moving_t, weights


def gradients(
    model: ModelParams,
    batch: Sequence[tuple[FrameWindow, GroundTruthLabels, float]],
    seed: int = 0,
):
    """Loss and exact parameter gradients for a batch of labeled windows.

    Pure in (model, batch, seed): repeated calls return identical
    values, and the finite-difference twin batch_loss sees the same
    dropout draws for the same seed.
    """
    arrays = assemble_batch(batch, model.config.num_features)
    rng = np.random.default_rng(seed)
    loss, grads, _ = loss_and_gradients(model, *arrays, training=True, dropout_rng=rng)
    return loss, grads


def batch_loss(
    model: ModelParams,
    batch: Sequence[tuple[FrameWindow, GroundTruthLabels, float]],
    seed: int = 0,
) -> float:
    """The scalar the gradients differentiate; same seed, same dropout."""
    arrays = assemble_batch(batch, model.config.num_features)
    rng = np.random.default_rng(seed)
    loss, _, _ = loss_and_gradients(model, *arrays, training=True, dropout_rng=rng)
    return loss
