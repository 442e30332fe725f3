"""Numpy building blocks with hand-written backward passes.

Every forward returns whatever its backward needs as an opaque cache.
Backwards return exact gradients of the values the forward produced,
which is what lets the whole model pass central-difference checks.
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5


def linear_forward(x, w, b):
    """Pointwise affine map on rows: (R, Cin) @ (Cin, Cout) + (Cout,)."""
    return x @ w + b, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dy, cache):
    return dy * cache


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def batchnorm_forward(x, gamma, beta, running_mean, running_var, training):
    """Normalize rows per channel.

    Training uses the batch statistics of the rows given (callers pass
    real points only) and reports them in the cache for the running
    update; evaluation uses the running statistics.  Never mutates the
    running arrays itself.
    """
    if training:
        if x.shape[0] == 0:
            raise ValueError("batch norm needs at least one row in training")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
    else:
        mu = running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xh = (x - mu) * inv
    out = gamma * xh + beta
    stats = (mu, var) if training else None
    return out, (xh, inv, gamma, training), stats


def batchnorm_backward(dy, cache):
    xh, inv, gamma, training = cache
    dgamma = (dy * xh).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxh = dy * gamma
    if not training:
        return dxh * inv, dgamma, dbeta
    r = xh.shape[0]
    dx = (inv / r) * (r * dxh - dxh.sum(axis=0) - xh * (dxh * xh).sum(axis=0))
    return dx, dgamma, dbeta


def segment_sums(values, counts):
    """Sum consecutive row groups: counts[k] rows belong to segment k.

    Returns an (S, C) array; empty segments sum to zero.  Row count must
    equal counts.sum().
    """
    counts = np.asarray(counts, dtype=np.int64)
    ends = np.cumsum(counts)
    csum = np.concatenate(
        [np.zeros((1, values.shape[1])), np.cumsum(values, axis=0)], axis=0
    )
    return csum[ends] - csum[ends - counts]


def gru_forward(x, w_ih, w_hh, b_ih, b_hh):
    """Single-layer GRU over (B, T, C); zero initial state.

    Gate layout along the stacked 3H axis is reset, update, candidate.
    Returns the final hidden state (B, H) and a cache of per-step
    intermediates.
    """
    batch, steps, _ = x.shape
    hidden = w_hh.shape[1]
    h = np.zeros((batch, hidden))
    step_caches = []
    for t in range(steps):
        xt = x[:, t, :]
        gi = xt @ w_ih.T + b_ih
        gh = h @ w_hh.T + b_hh
        i_r, i_z, i_n = np.split(gi, 3, axis=1)
        h_r, h_z, h_n = np.split(gh, 3, axis=1)
        r = sigmoid(i_r + h_r)
        z = sigmoid(i_z + h_z)
        n = np.tanh(i_n + r * h_n)
        h_new = (1.0 - z) * n + z * h
        step_caches.append((xt, h, r, z, n, h_n))
        h = h_new
    return h, (step_caches, w_ih, w_hh, x.shape)


def gru_backward(dh, cache):
    """Backpropagate through time from the final-state gradient."""
    step_caches, w_ih, w_hh, x_shape = cache
    dx = np.zeros(x_shape)
    dw_ih = np.zeros_like(w_ih)
    dw_hh = np.zeros_like(w_hh)
    db_ih = np.zeros(w_ih.shape[0])
    db_hh = np.zeros(w_hh.shape[0])
    dh = dh.copy()
    for t in range(len(step_caches) - 1, -1, -1):
        xt, h_prev, r, z, n, h_n = step_caches[t]
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh_prev = dh * z
        da_n = dn * (1.0 - n * n)
        dr = da_n * h_n
        dh_n = da_n * r
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dgi = np.concatenate([da_r, da_z, da_n], axis=1)
        dgh = np.concatenate([da_r, da_z, dh_n], axis=1)
        dx[:, t, :] = dgi @ w_ih
        dh_prev = dh_prev + dgh @ w_hh
        dw_ih += dgi.T @ xt
        dw_hh += dgh.T @ h_prev
        db_ih += dgi.sum(axis=0)
        db_hh += dgh.sum(axis=0)
        dh = dh_prev
    return dx, dw_ih, dw_hh, db_ih, db_hh
