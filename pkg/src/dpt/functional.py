"""Differentiable building blocks on top of :class:`~dpt.tensor.Tensor`.

Images and feature maps are ``C x H x W`` (no batch axis). Convolutions use
the cross-correlation convention; transpose convolution is the exact adjoint
of :func:`conv2d` and takes weights laid out as ``C_in x C_out x k x k``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .tensor import Tensor, unbroadcast

_SQRT2 = np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _check_dtypes(*tensors):
    dtype = tensors[0].dtype
    for t in tensors[1:]:
        if t is not None and t.dtype != dtype:
            raise TypeError(f"dtype mismatch: {dtype} vs {t.dtype}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading axes (if any) are batch axes and broadcast."""
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul needs operands with at least two axes")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    _check_dtypes(a, b)
    x, y = a.data, b.data

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(y, -1, -2), x.shape)
        gb = unbroadcast(np.swapaxes(x, -1, -2) @ g, y.shape)
        return ga, gb

    return Tensor.from_op(x @ y, (a, b), backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as ``in x out``."""
    out = matmul(x, weight)
    return out if bias is None else out + bias


# -- convolution ---------------------------------------------------------


def _windows(xp: np.ndarray, k: int, stride: int, h_out: int, w_out: int) -> np.ndarray:
    """View of shape ``C x h_out x w_out x k x k`` over a padded input."""
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    return win[:, : (h_out - 1) * stride + 1 : stride, : (w_out - 1) * stride + 1 : stride]


def _corr(xp: np.ndarray, w: np.ndarray, stride: int, h_out: int, w_out: int) -> np.ndarray:
    cols = _windows(xp, w.shape[-1], stride, h_out, w_out)
    return np.tensordot(w, cols, axes=([1, 2, 3], [0, 3, 4]))


def _corr_adjoint(g: np.ndarray, w: np.ndarray, stride: int, height: int, width: int) -> np.ndarray:
    """Scatter-add ``g`` (O x h x w) back through ``w`` (O x C x k x k)."""
    k = w.shape[-1]
    _, h, wd = g.shape
    cols = np.tensordot(w, g, axes=([0], [0]))  # C x k x k x h x w
    out = np.zeros((w.shape[1], height, width), dtype=g.dtype)
    for i in range(k):
        for j in range(k):
            out[:, i : i + (h - 1) * stride + 1 : stride, j : j + (wd - 1) * stride + 1 : stride] += cols[:, i, j]
    return out


def _corr_weight_grad(xp: np.ndarray, g: np.ndarray, k: int, stride: int) -> np.ndarray:
    cols = _windows(xp, k, stride, g.shape[1], g.shape[2])
    return np.tensordot(g, cols, axes=([1, 2], [1, 2]))


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation of ``x`` (C_in x H x W) with ``weight`` (C_out x C_in x k x k)."""
    if x.ndim != 3 or weight.ndim != 4:
        raise ValueError(f"conv2d expects C x H x W input and 4-D weight, got {x.shape}, {weight.shape}")
    if weight.shape[1] != x.shape[0]:
        raise ValueError(f"conv2d channel mismatch: input {x.shape[0]}, weight {weight.shape[1]}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    _check_dtypes(x, weight, bias)
    c, h, w = x.shape
    k = weight.shape[-1]
    if h + 2 * padding < k or w + 2 * padding < k:
        raise ValueError(f"kernel {k} larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (w + 2 * padding - k) // stride + 1
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding))) if padding else x.data
    wd = weight.data
    out = _corr(xp, wd, stride, h_out, w_out)
    if bias is not None:
        out = out + bias.data[:, None, None]

    def backward(g):
        gx = _corr_adjoint(g, wd, stride, xp.shape[1], xp.shape[2])
        if padding:
            gx = gx[:, padding : padding + h, padding : padding + w]
        gw = _corr_weight_grad(xp, g, k, stride)
        gb = g.sum(axis=(1, 2)) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv2d")


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transpose convolution; ``weight`` is ``C_in x C_out x k x k``.

    Output size is ``(H - 1) * stride - 2 * padding + k + output_padding``.
    """
    if x.ndim != 3 or weight.ndim != 4:
        raise ValueError(f"conv_transpose2d expects C x H x W input and 4-D weight, got {x.shape}, {weight.shape}")
    if weight.shape[0] != x.shape[0]:
        raise ValueError(f"conv_transpose2d channel mismatch: input {x.shape[0]}, weight {weight.shape[0]}")
    if not 0 <= output_padding < stride:
        raise ValueError(f"output_padding must be in [0, stride), got {output_padding} for stride {stride}")
    _check_dtypes(x, weight, bias)
    _, h, w = x.shape
    k = weight.shape[-1]
    h_out = (h - 1) * stride - 2 * padding + k + output_padding
    w_out = (w - 1) * stride - 2 * padding + k + output_padding
    if h_out < 1 or w_out < 1:
        raise ValueError("conv_transpose2d output would be empty")
    # canvas holds the full scatter; positions past it (output_padding) only see the bias
    hc = max((h - 1) * stride + k, padding + h_out)
    wc = max((w - 1) * stride + k, padding + w_out)
    wd = weight.data
    canvas = _corr_adjoint(x.data, wd, stride, hc, wc)
    out = canvas[:, padding : padding + h_out, padding : padding + w_out]
    if bias is not None:
        out = out + bias.data[:, None, None]
    else:
        out = np.ascontiguousarray(out)

    def backward(g):
        gc = np.zeros((wd.shape[1], hc, wc), dtype=g.dtype)
        gc[:, padding : padding + h_out, padding : padding + w_out] = g
        gx = _corr(gc, wd, stride, h, w)
        gw = _corr_weight_grad(gc, x.data, k, stride)
        gb = g.sum(axis=(1, 2)) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv_transpose2d")


# -- resampling ----------------------------------------------------------


def _interp_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Align-corners linear interpolation as an ``n_out x n_in`` matrix."""
    m = np.zeros((n_out, n_in), dtype=np.float64)
    if n_in == 1:
        m[:, 0] = 1.0
        return m.astype(dtype)
    if n_out == 1:
        m[0, 0] = 1.0
        return m.astype(dtype)
    src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(np.floor(src).astype(int), n_in - 2)
    frac = src - lo
    rows = np.arange(n_out)
    m[rows, lo] += 1.0 - frac
    m[rows, lo + 1] += frac
    return m.astype(dtype)


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of ``C x H x W`` with align-corners sampling."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    _, h, w = x.shape
    if (out_h, out_w) == (h, w):
        return Tensor.from_op(x.data.copy(), (x,), lambda g: (g,), "bilinear_resize")
    rh = _interp_matrix(h, out_h, x.dtype)
    rw = _interp_matrix(w, out_w, x.dtype)
    out = np.matmul(np.matmul(rh, x.data), rw.T)

    def backward(g):
        return (np.matmul(np.matmul(rh.T, g), rw),)

    return Tensor.from_op(out, (x,), backward, "bilinear_resize")


def upsample2x(x: Tensor) -> Tensor:
    return bilinear_resize(x, 2 * x.shape[1], 2 * x.shape[2])


# -- activations -----------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    return x.relu()


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, ``x * Phi(x)``."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd / _SQRT2))

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * xd * xd)
        return (g * (cdf + xd * pdf),)

    return Tensor.from_op((xd * cdf).astype(xd.dtype), (x,), backward, "gelu")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; the identity outside training mode."""
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * Tensor(keep)


# -- normalization ---------------------------------------------------------


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ValueError(f"layer_norm: last axis {x.shape[-1]} does not match gamma/beta {gamma.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + eps).sqrt() * gamma + beta


def group_norm(x: Tensor, groups: int, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Group normalization of a ``C x H x W`` map."""
    c, h, w = x.shape
    if c % groups:
        raise ValueError(f"group_norm: {c} channels not divisible by {groups} groups")
    g = x.reshape(groups, (c // groups) * h * w)
    mu = g.mean(axis=1, keepdims=True)
    centered = g - mu
    var = (centered * centered).mean(axis=1, keepdims=True)
    normed = (centered / (var + eps).sqrt()).reshape(c, h, w)
    return normed * gamma.reshape(c, 1, 1) + beta.reshape(c, 1, 1)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Batch norm over the spatial axes of a single ``C x H x W`` sample.

    In training mode the running buffers are updated in place.
    """
    c = x.shape[0]
    if training:
        mu = x.mean(axis=(1, 2), keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=(1, 2), keepdims=True)
        n = x.shape[1] * x.shape[2]
        unbiased = var.data.reshape(c) * (n / max(n - 1, 1))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.data.reshape(c)
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
        normed = centered / (var + eps).sqrt()
    else:
        mu = Tensor(running_mean.reshape(c, 1, 1).astype(x.dtype))
        std = Tensor(np.sqrt(running_var + eps).reshape(c, 1, 1).astype(x.dtype))
        normed = (x - mu) / std
    return normed * gamma.reshape(c, 1, 1) + beta.reshape(c, 1, 1)


def weight_standardize(w: Tensor, eps: float = 1e-6) -> Tensor:
    """Zero-mean, unit-variance filters over each output channel's fan-in."""
    c_out = w.shape[0]
    flat = w.reshape(c_out, -1)
    mu = flat.mean(axis=1, keepdims=True)
    centered = flat - mu
    var = (centered * centered).mean(axis=1, keepdims=True)
    return (centered / (var + eps).sqrt()).reshape(w.shape)
