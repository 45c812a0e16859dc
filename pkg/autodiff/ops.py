"""
Differentiable Ops
Forward definitions and local gradient rules for the classifier layers
"""

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff.tensor import Tensor, active_tape, check_finite
from common.errors import ContractError, DimensionError, LabelIndexError, ParameterError

logger = logging.getLogger(__name__)


def _emit(op, data, parents, vjp, **saved):
    """Wrap a forward result and record it on the active tape"""
    out = Tensor(check_finite(op, data), dtype=parents[0].dtype)
    tape = active_tape()
    if tape is not None:
        tape.record(op, out, parents, vjp, **saved)
    return out


def _as_tensor(value, like):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


def _require_same_shape(op, a, b):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: operand shapes differ", a.shape, b.shape)


def sign(array):
    """Elementwise sign with sign(0) == 0, same dtype as the input"""
    array = array.data if isinstance(array, Tensor) else np.asarray(array)
    return np.sign(array).astype(array.dtype, copy=False)


# Elementwise and reduction glue


def add(a, b):
    b = _as_tensor(b, a)
    _require_same_shape("add", a, b)

    def vjp(g, needs):
        return g, g

    return _emit("add", a.data + b.data, (a, b), vjp)


def sub(a, b):
    b = _as_tensor(b, a)
    _require_same_shape("sub", a, b)

    def vjp(g, needs):
        return g, -g

    return _emit("sub", a.data - b.data, (a, b), vjp)


def mul(a, b):
    b = _as_tensor(b, a)
    _require_same_shape("mul", a, b)
    a_data, b_data = a.data, b.data

    def vjp(g, needs):
        return (g * b_data if needs[0] else None,
                g * a_data if needs[1] else None)

    return _emit("mul", a_data * b_data, (a, b), vjp)


def scale(x, factor):
    factor = x.dtype.type(factor)

    def vjp(g, needs):
        return (g * factor,)

    return _emit("scale", x.data * factor, (x,), vjp, factor=factor)


def square(x):
    x_data = x.data

    def vjp(g, needs):
        return (2 * g * x_data,)

    return _emit("square", x_data * x_data, (x,), vjp)


def reduce_sum(x):
    shape = x.shape

    def vjp(g, needs):
        return (np.broadcast_to(g, shape).astype(g.dtype, copy=True),)

    return _emit("reduce_sum", np.asarray(np.sum(x.data), dtype=x.dtype), (x,), vjp)


def mean(x):
    shape, count = x.shape, x.size

    def vjp(g, needs):
        return (np.full(shape, g / count, dtype=g.dtype),)

    return _emit("mean", np.asarray(np.sum(x.data) / count, dtype=x.dtype), (x,), vjp)


def flatten(x):
    """(N, ...) -> (N, prod(...))"""
    shape = x.shape

    def vjp(g, needs):
        return (g.reshape(shape),)

    return _emit("flatten", x.data.reshape(shape[0], -1), (x,), vjp)


def add_bias(x, bias):
    """Add a per-channel bias along axis 1 of an (N, C, ...) tensor"""
    if bias.data.ndim != 1 or x.data.ndim < 2 or x.shape[1] != bias.shape[0]:
        raise DimensionError("add_bias: channel count mismatch", x.shape, bias.shape)
    view = (1, -1) + (1,) * (x.data.ndim - 2)
    reduce_axes = (0,) + tuple(range(2, x.data.ndim))

    def vjp(g, needs):
        return (g if needs[0] else None,
                g.sum(axis=reduce_axes) if needs[1] else None)

    return _emit("add_bias", x.data + bias.data.reshape(view), (x, bias), vjp)


# Layers


def conv2d(x, kernel, stride=1):
    """
    Valid (unpadded) cross-correlation

    Args:
        x: Tensor N x C x H x W
        kernel: Tensor O x C x K x K
        stride: Step between windows

    Returns:
        Tensor N x O x ((H-K)//stride+1) x ((W-K)//stride+1)
    """
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise DimensionError("conv2d expects NCHW input and OCKK kernel", x.shape, kernel.shape)
    if stride < 1:
        raise ParameterError(f"conv2d stride must be >= 1, got {stride}")
    n, c, h, w = x.shape
    o, kc, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError("conv2d channel mismatch", x.shape, kernel.shape)
    if h < kh or w < kw:
        raise DimensionError("conv2d input smaller than kernel", x.shape, kernel.shape)

    windows = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    out = np.tensordot(windows, kernel.data, axes=((1, 4, 5), (1, 2, 3))).transpose(0, 3, 1, 2)
    k_data = kernel.data

    def vjp(g, needs):
        grad_x = grad_k = None
        if needs[0]:
            grad_x = np.zeros(x.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(g, k_data[:, :, i, j], axes=((1,), (0,)))
                    grad_x[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                        contrib.transpose(0, 3, 1, 2)
        if needs[1]:
            grad_k = np.tensordot(g, windows, axes=((0, 2, 3), (0, 2, 3)))
        return grad_x, grad_k

    return _emit("conv2d", np.ascontiguousarray(out), (x, kernel), vjp, stride=stride)


def relu(x):
    x_data = x.data

    def vjp(g, needs):
        # subgradient at exactly 0 is 0
        return (g * (x_data > 0),)

    return _emit("relu", np.maximum(x_data, 0), (x,), vjp)


def max_pool2d(x, window=2):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a window are dropped"""
    if x.data.ndim != 4:
        raise DimensionError("max_pool2d expects NCHW input", x.shape)
    if window < 1:
        raise ParameterError(f"max_pool2d window must be >= 1, got {window}")
    n, c, h, w = x.shape
    out_h, out_w = h // window, w // window
    if out_h == 0 or out_w == 0:
        raise DimensionError(f"max_pool2d window {window} larger than input", x.shape)

    blocks = (x.data[:, :, :out_h * window, :out_w * window]
              .reshape(n, c, out_h, window, out_w, window)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(n, c, out_h, out_w, window * window))
    # ties route the gradient to the first maximum
    argmax = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]

    def vjp(g, needs):
        routed = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(routed, argmax[..., None], g[..., None], axis=-1)
        routed = (routed.reshape(n, c, out_h, out_w, window, window)
                  .transpose(0, 1, 2, 4, 3, 5)
                  .reshape(n, c, out_h * window, out_w * window))
        grad_x = np.zeros(x.shape, dtype=g.dtype)
        grad_x[:, :, :out_h * window, :out_w * window] = routed
        return (grad_x,)

    return _emit("max_pool2d", out, (x,), vjp, window=window)


def linear(x, weight, bias=None):
    """
    Affine map x @ W.T + b

    Args:
        x: Tensor N x in
        weight: Tensor out x in
        bias: Optional Tensor out
    """
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError("linear: input width does not match weight", x.shape, weight.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError("linear: bias does not match weight", weight.shape, bias.shape)
    x_data, w_data = x.data, weight.data
    out = x_data @ w_data.T

    if bias is None:
        def vjp(g, needs):
            return (g @ w_data if needs[0] else None,
                    g.T @ x_data if needs[1] else None)

        return _emit("linear", out, (x, weight), vjp)

    def vjp_bias(g, needs):
        return (g @ w_data if needs[0] else None,
                g.T @ x_data if needs[1] else None,
                g.sum(axis=0) if needs[2] else None)

    return _emit("linear", out + bias.data, (x, weight, bias), vjp_bias)


def dropout(x, p, train_mode, rng=None):
    """
    Inverted dropout

    In train mode each element is zeroed with probability p and the
    survivors are scaled by 1/(1-p). In eval mode (or p == 0) the input
    is returned unchanged and the generator is not consumed.
    """
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if not train_mode or p == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in train mode needs a random generator")
    keep = rng.random(x.shape) >= p
    factor = (keep / (1.0 - p)).astype(x.dtype)

    def vjp(g, needs):
        return (g * factor,)

    return _emit("dropout", x.data * factor, (x,), vjp, p=p)


# Losses


def log_softmax(logits, axis=-1):
    """Log-probabilities computed with max subtraction"""
    z = logits.data
    shifted = z - np.max(z, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def vjp(g, needs):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return _emit("log_softmax", out, (logits,), vjp, axis=axis)


def _check_labels(labels, count, num_classes):
    labels = np.asarray(labels)
    if labels.shape != (count,):
        raise DimensionError("labels must be one index per row", labels.shape, (count,))
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        sample = int(bad[0])
        raise LabelIndexError(sample, int(labels[sample]), num_classes)
    return labels.astype(np.int64)


def cross_entropy(log_probs, labels):
    """Mean negative log-probability of the true class"""
    if log_probs.data.ndim != 2:
        raise DimensionError("cross_entropy expects N x classes log-probabilities", log_probs.shape)
    n, num_classes = log_probs.shape
    labels = _check_labels(labels, n, num_classes)
    rows = np.arange(n)
    picked = log_probs.data[rows, labels]
    out = np.asarray(-np.sum(picked) / n, dtype=log_probs.dtype)

    def vjp(g, needs):
        grad = np.zeros(log_probs.shape, dtype=g.dtype)
        grad[rows, labels] = -g / n
        return (grad,)

    return _emit("cross_entropy", out, (log_probs,), vjp)


def kl_divergence(p_log, q_log):
    """
    Mean over rows of KL(p || q) in nats, from log-probability rows

    Args:
        p_log: Tensor N x classes, log p
        q_log: Tensor N x classes, log q
    """
    _require_same_shape("kl_divergence", p_log, q_log)
    n = p_log.shape[0]
    p = np.exp(p_log.data)
    diff = p_log.data - q_log.data
    # float32 rounding can push nearly equal rows below zero
    total = np.sum(p.astype(np.float64) * diff.astype(np.float64)) / n
    out = np.asarray(np.maximum(total, 0.0), dtype=p_log.dtype)

    def vjp(g, needs):
        scale_ = g / n
        return (scale_ * p * (diff + 1) if needs[0] else None,
                -scale_ * p if needs[1] else None)

    return _emit("kl_divergence", out, (p_log, q_log), vjp)
