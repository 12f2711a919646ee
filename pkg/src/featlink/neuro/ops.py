"""Inference-only tensor operators on channel-major (C, H, W) feature maps.

Storage is float32; convolution and FC sums accumulate in float64.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


def _as_map(x):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected a (C, H, W) feature map, got shape {x.shape}")
    return x


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation.

    Parameters
    ----------
    x : ndarray, shape (C_in, H, W)
    weight : ndarray, shape (C_out, C_in, kh, kw)
    bias : ndarray, shape (C_out,), optional
    """
    x = _as_map(x)
    weight = np.asarray(weight)
    c_out, c_in, kh, kw = weight.shape
    if x.shape[0] != c_in:
        raise ValueError(f"kernel expects {c_in} input channels, got {x.shape[0]}")
    if stride > 1 and (x.shape[1] % stride or x.shape[2] % stride):
        raise ValueError(f"spatial dims {x.shape[1:]} not divisible by stride {stride}")
    xp = np.pad(x.astype(np.float64),
                ((0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.einsum("chwij,ocij->ohw", win, weight.astype(np.float64),
                    optimize=True)
    if bias is not None:
        out += np.asarray(bias, np.float64)[:, None, None]
    return out.astype(np.float32)


def linear(x, weight, bias=None):
    """``weight @ x + bias`` on the last axis of x."""
    out = np.asarray(x, np.float64) @ np.asarray(weight, np.float64).T
    if bias is not None:
        out = out + np.asarray(bias, np.float64)
    return out


def gelu(x):
    """tanh-approximated GELU."""
    x = np.asarray(x)
    x64 = x.astype(np.float64)
    out = 0.5 * x64 * (1.0 + np.tanh(_GELU_C * (x64 + 0.044715 * x64 ** 3)))
    return out.astype(x.dtype) if np.issubdtype(x.dtype, np.floating) else out


def sigmoid(x):
    x = np.asarray(x, np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def batchnorm_infer(x, mean, var, scale, shift, eps=BN_EPS):
    x = _as_map(x)
    inv = np.asarray(scale, np.float64) / np.sqrt(np.asarray(var, np.float64) + eps)
    out = (x - np.asarray(mean, np.float64)[:, None, None]) * inv[:, None, None]
    return (out + np.asarray(shift, np.float64)[:, None, None]).astype(np.float32)


def se_gate(x, fc1_w, fc1_b, fc2_w, fc2_b):
    """Squeeze-and-excitation channel gates in (0, 1), shape (C,)."""
    x = _as_map(x)
    pooled = x.astype(np.float64).mean(axis=(1, 2))
    hidden = gelu(linear(pooled, fc1_w, fc1_b))
    return sigmoid(linear(hidden, fc2_w, fc2_b))


def se_block(x, fc1_w, fc1_b, fc2_w, fc2_b):
    gate = se_gate(x, fc1_w, fc1_b, fc2_w, fc2_b)
    return (x * gate[:, None, None]).astype(np.float32)


def _bilinear_matrix(n_in, n_out):
    """Row-stochastic interpolation matrix with half-pixel centers."""
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, None)
    lo = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    a = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(a, (rows, lo), 1.0 - frac)
    np.add.at(a, (rows, hi), frac)
    return a


def bilinear_upsample(x, factor=2):
    """Bilinear resize by an integer factor (align_corners=False)."""
    x = _as_map(x)
    _, h, w = x.shape
    ah = _bilinear_matrix(h, h * factor)
    aw = _bilinear_matrix(w, w * factor)
    out = np.einsum("ph,chw,qw->cpq", ah, x.astype(np.float64), aw,
                    optimize=True)
    return out.astype(np.float32)


def max_pool2(x):
    """2 x 2 max pooling with stride 2."""
    x = _as_map(x)
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"max_pool2 needs even spatial dims, got {h}x{w}")
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def pointwise_fc(x, weight, bias=None):
    """Affine map applied to the channel vector at every pixel."""
    x = _as_map(x)
    c = x.shape[0]
    weight = np.asarray(weight)
    if weight.shape[1] != c:
        raise ValueError(f"FC expects {weight.shape[1]} channels, got {c}")
    flat = x.reshape(c, -1).astype(np.float64)
    out = np.asarray(weight, np.float64) @ flat
    if bias is not None:
        out += np.asarray(bias, np.float64)[:, None]
    return out.reshape((weight.shape[0],) + x.shape[1:]).astype(np.float32)
