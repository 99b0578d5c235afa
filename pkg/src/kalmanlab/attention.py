"""Key-less attention over a measurement window.

The network projects each window element, scores it by the inner
product of its query and value vectors (the value doubles as the key),
pools the values with those scores, and turns a normalized residual
into one weight per window position.  The fused measurement is the
weight-averaged window, which then feeds a standard EKF (or its PCA
variant) as if it were a single observation.

Layer normalization runs per feature across the window positions, so
the output weights remain trainable even for scalar measurement
streams; the residual ``W_v^T b`` bridges the pooled value vector back
to input width.  Training is full-batch gradient descent on one-step
prediction error.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from . import numerics
from .errors import DataError, DimensionError, NumericError
from .filters import ekf_step
from .pca import MeasurementWindow

#: Variance floor inside the layer-norm square root.
LN_EPS = 1e-12

#: Default number of training epochs.
DEFAULT_EPOCHS = 200

#: Default learning rate for full-batch gradient descent.
DEFAULT_LR = 1e-2


@dataclass
class AttentionParams:
    """Weights of the key-less attention network.

    ``w_a``: input projection (d_in, d_in); ``w_q``: query (d_h, d_in);
    ``w_v``: value (d_h, d_in); ``w_l``: per-position output rows
    (n, d_in).  ``output_mode`` selects how position logits become
    weights: ``"softmax"`` (default) or the literal ``"ratio"`` form
    l / sum(l), which is only meaningful while all logits stay positive.
    """

    w_a: np.ndarray
    w_q: np.ndarray
    w_v: np.ndarray
    w_l: np.ndarray
    output_mode: str = "softmax"

    def __post_init__(self):
        self.w_a = numerics.as_matrix(self.w_a, "w_a")
        self.w_q = numerics.as_matrix(self.w_q, "w_q")
        self.w_v = numerics.as_matrix(self.w_v, "w_v")
        self.w_l = numerics.as_matrix(self.w_l, "w_l")
        d_in = self.w_a.shape[1]
        if self.w_a.shape[0] != d_in:
            raise DimensionError(f"w_a must be square, got {self.w_a.shape}")
        if self.w_q.shape[1] != d_in or self.w_v.shape[1] != d_in:
            raise DimensionError(
                f"w_q {self.w_q.shape} and w_v {self.w_v.shape} must have "
                f"{d_in} columns"
            )
        if self.w_q.shape[0] != self.w_v.shape[0]:
            raise DimensionError(
                f"hidden widths differ: w_q {self.w_q.shape[0]}, "
                f"w_v {self.w_v.shape[0]}"
            )
        if self.w_l.shape[1] != d_in:
            raise DimensionError(
                f"w_l has {self.w_l.shape[1]} columns, expected {d_in}"
            )
        if self.output_mode not in ("softmax", "ratio"):
            raise ValueError(f"unknown output_mode {self.output_mode!r}")

    @property
    def d_in(self):
        return self.w_a.shape[1]

    @property
    def d_hidden(self):
        return self.w_q.shape[0]

    @property
    def window_len(self):
        return self.w_l.shape[0]


@dataclass
class AttentionOutput:
    """Result of one forward pass over a full window."""

    s: np.ndarray
    b_hat: np.ndarray
    z_fused: np.ndarray

    def __post_init__(self):
        total = float(np.sum(self.s))
        if abs(total - 1.0) > 1e-9:
            raise NumericError(f"attention weights sum to {total!r}, expected 1")


def attn_init(d_in, d_hidden, window_len, seed=0, scale=0.1):
    """Fresh parameters: small random projections, zero output rows.

    Zero ``w_l`` makes an untrained network emit uniform weights, i.e.
    the fused measurement starts as the window mean.
    """
    rng = numerics.make_rng(seed)
    return AttentionParams(
        w_a=scale * rng.standard_normal((d_in, d_in)),
        w_q=scale * rng.standard_normal((d_hidden, d_in)),
        w_v=scale * rng.standard_normal((d_hidden, d_in)),
        w_l=np.zeros((window_len, d_in)),
    )


def _window_array(window, params):
    if isinstance(window, MeasurementWindow):
        if not window.full:
            raise DataError(
                f"window has {len(window)} of {window.capacity} entries"
            )
        data = window.values()
    else:
        data = numerics.as_matrix(window, "window")
    if data.shape != (params.window_len, params.d_in):
        raise DimensionError(
            f"window has shape {data.shape}, expected "
            f"({params.window_len}, {params.d_in})"
        )
    return data


def _softmax_rows(m):
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_batch(params, xs):
    """Forward pass over a batch of windows, keeping intermediates.

    ``xs`` has shape (batch, n, d_in); every returned intermediate keeps
    the batch as its leading axis.
    """
    scale = 1.0 / np.sqrt(params.d_hidden)
    a = xs @ params.w_a.T
    qm = a @ params.w_q.T
    vm = a @ params.w_v.T
    scores = (qm * vm).sum(axis=2) * scale
    a_hat = _softmax_rows(scores)
    b = (vm * a_hat[:, :, None]).sum(axis=1)
    bridge = b @ params.w_v
    u = xs + bridge[:, None, :]
    # normalize over the whole add-and-norm layer (all n * d_in units);
    # narrower axes would cancel the bridge, which is constant across
    # window positions, and cut the attention trunk out of the network
    mu = u.mean(axis=(1, 2), keepdims=True)
    sigma = np.sqrt(u.var(axis=(1, 2), keepdims=True) + LN_EPS)
    b_hat = (u - mu) / sigma
    logits = (params.w_l[None, :, :] * b_hat).sum(axis=2)
    if params.output_mode == "softmax":
        s = _softmax_rows(logits)
    else:
        total = logits.sum(axis=1, keepdims=True)
        if np.any(np.abs(total) < 1e-12):
            raise NumericError("ratio output: logits sum to zero")
        s = logits / total
    fused = (xs * s[:, :, None]).sum(axis=1)
    return {
        "a": a,
        "qm": qm,
        "vm": vm,
        "a_hat": a_hat,
        "b": b,
        "u": u,
        "sigma": sigma,
        "b_hat": b_hat,
        "logits": logits,
        "s": s,
        "fused": fused,
        "scale": scale,
    }


def attn_forward(params, window):
    """One forward pass over a full measurement window."""
    data = _window_array(window, params)
    out = _forward_batch(params, data[None, :, :])
    return AttentionOutput(
        s=out["s"][0], b_hat=out["b_hat"][0], z_fused=out["fused"][0]
    )


def _softmax_backward(s, grad_s):
    dot = (s * grad_s).sum(axis=1, keepdims=True)
    return s * (grad_s - dot)


def _loss_and_grads(params, xs, ys):
    """Mean-squared one-step-prediction loss and its parameter gradients."""
    fwd = _forward_batch(params, xs)
    err = fwd["fused"] - ys
    loss = float(np.mean(err**2))

    g_fused = 2.0 * err / err.size
    g_s = (xs * g_fused[:, None, :]).sum(axis=2)
    if params.output_mode == "softmax":
        g_logits = _softmax_backward(fwd["s"], g_s)
    else:
        total = fwd["logits"].sum(axis=1, keepdims=True)
        g_logits = (g_s - (fwd["s"] * g_s).sum(axis=1, keepdims=True)) / total

    g_w_l = (g_logits[:, :, None] * fwd["b_hat"]).sum(axis=0)
    g_b_hat = g_logits[:, :, None] * params.w_l[None, :, :]

    # layer-norm backward over all window * feature units
    b_hat = fwd["b_hat"]
    sigma = fwd["sigma"]
    mean_g = g_b_hat.mean(axis=(1, 2), keepdims=True)
    mean_gb = (g_b_hat * b_hat).mean(axis=(1, 2), keepdims=True)
    g_u = (g_b_hat - mean_g - b_hat * mean_gb) / sigma

    g_bridge = g_u.sum(axis=1)
    g_w_v = fwd["b"].T @ g_bridge  # from bridge = b @ w_v
    g_b = g_bridge @ params.w_v.T
    g_vm = fwd["a_hat"][:, :, None] * g_b[:, None, :]
    g_a_hat = (fwd["vm"] * g_b[:, None, :]).sum(axis=2)
    g_scores = _softmax_backward(fwd["a_hat"], g_a_hat)
    g_qm = g_scores[:, :, None] * fwd["vm"] * fwd["scale"]
    g_vm = g_vm + g_scores[:, :, None] * fwd["qm"] * fwd["scale"]

    a = fwd["a"]
    g_w_v = g_w_v + np.einsum("bnh,bnd->hd", g_vm, a)
    g_w_q = np.einsum("bnh,bnd->hd", g_qm, a)
    g_a = g_vm @ params.w_v + g_qm @ params.w_q
    g_w_a = np.einsum("bnd,bne->de", g_a, xs)

    grads = {"w_a": g_w_a, "w_q": g_w_q, "w_v": g_w_v, "w_l": g_w_l}
    return loss, grads


def _training_samples(series, window_len):
    values = np.asarray(series, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise DimensionError(f"series must be 1-D or 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("series contains non-finite entries")
    t = values.shape[0]
    if t < window_len + 1:
        raise DataError(
            f"series has {t} points, need at least {window_len + 1} "
            f"for window length {window_len}"
        )
    count = t - window_len
    xs = np.stack([values[i : i + window_len] for i in range(count)])
    ys = values[window_len:]
    return xs, ys


def attn_train(params, series, epochs=DEFAULT_EPOCHS, lr=DEFAULT_LR):
    """Full-batch gradient descent on one-step prediction error.

    Returns new parameters (the input is not mutated) and the per-epoch
    loss curve, recorded before each update.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    xs, ys = _training_samples(series, params.window_len)
    if ys.shape[1] != params.d_in:
        raise DimensionError(
            f"series width {ys.shape[1]} does not match params d_in {params.d_in}"
        )

    current = replace(params)
    losses = np.empty(epochs)
    for epoch in range(epochs):
        loss, grads = _loss_and_grads(current, xs, ys)
        if not np.isfinite(loss):
            raise NumericError(f"training diverged at epoch {epoch}")
        losses[epoch] = loss
        current = AttentionParams(
            w_a=current.w_a - lr * grads["w_a"],
            w_q=current.w_q - lr * grads["w_q"],
            w_v=current.w_v - lr * grads["w_v"],
            w_l=current.w_l - lr * grads["w_l"],
            output_mode=current.output_mode,
        )
    return current, losses


def akf_step(state, model, params, window):
    """EKF step driven by the attention-fused window measurement."""
    out = attn_forward(params, window)
    return ekf_step(state, model, out.z_fused)


def params_to_json(params):
    """Serialize parameters to a JSON string (fixed key order)."""
    doc = {
        "d_in": params.d_in,
        "d_hidden": params.d_hidden,
        "window": params.window_len,
        "output_mode": params.output_mode,
        "w_a": params.w_a.tolist(),
        "w_q": params.w_q.tolist(),
        "w_v": params.w_v.tolist(),
        "w_l": params.w_l.tolist(),
    }
    return json.dumps(doc, indent=2)


def params_from_json(text):
    """Parse parameters serialized by :func:`params_to_json`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid attention params JSON: {exc}") from None
    required = {"d_in", "d_hidden", "window", "w_a", "w_q", "w_v", "w_l"}
    missing = required - set(doc)
    if missing:
        raise DataError(f"attention params JSON missing keys: {sorted(missing)}")
    params = AttentionParams(
        w_a=np.array(doc["w_a"], dtype=float),
        w_q=np.array(doc["w_q"], dtype=float),
        w_v=np.array(doc["w_v"], dtype=float),
        w_l=np.array(doc["w_l"], dtype=float),
        output_mode=doc.get("output_mode", "softmax"),
    )
    expected = (int(doc["d_in"]), int(doc["d_hidden"]), int(doc["window"]))
    actual = (params.d_in, params.d_hidden, params.window_len)
    if expected != actual:
        raise DataError(
            f"attention params JSON dims {expected} do not match matrices {actual}"
        )
    return params
