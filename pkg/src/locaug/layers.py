"""Differentiable primitives: convolution, pooling, upsampling, activations.

Every operation here has an exact, hand-derived backward pass; the test
suite checks each one against central finite differences.  Convolution uses
the cross-correlation convention (no kernel flip).  ReLU's subgradient at 0
is taken as 0, and max-pool ties break to the first element in row-major
window order, so backward passes are fully deterministic.
"""

from dataclasses import dataclass

import numpy as np

from . import backend

PADDINGS = ("zero", "none")


@dataclass
class ConvParams:
    weights: np.ndarray  # [Cout, Cin, K, K]
    bias: np.ndarray  # [Cout]
    padding: str = "zero"

    def __post_init__(self):
        if self.weights.ndim != 4 or self.weights.shape[2] != self.weights.shape[3]:
            raise ValueError(f"weights must be [Cout,Cin,K,K], got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bias length must equal Cout")
        if self.padding not in PADDINGS:
            raise ValueError(f"padding must be one of {PADDINGS}")

    @property
    def kernel(self):
        return self.weights.shape[2]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def pad(self):
        return self.kernel // 2 if self.padding == "zero" else 0


@dataclass
class LayerGrad:
    d_weights: np.ndarray
    d_bias: np.ndarray
    d_input: np.ndarray


def _check_conv_input(x, p):
    if x.ndim != 4:
        raise ValueError(f"expected [N,C,H,W] input, got rank {x.ndim}")
    if x.shape[1] != p.in_channels:
        raise ValueError(
            f"channel mismatch: input has {x.shape[1]} channels, kernel expects {p.in_channels}"
        )
    if p.padding == "none" and (x.shape[2] < p.kernel or x.shape[3] < p.kernel):
        raise ValueError(
            f"spatial extent {x.shape[2:]} smaller than kernel {p.kernel} with padding=none"
        )


def conv2d(x, p):
    """Stride-1 cross-correlation.  Zero padding preserves the spatial size;
    padding=none shrinks it by kernel-1 per axis."""
    _check_conv_input(x, p)
    return backend.conv2d_forward(x, p.weights, p.bias, p.pad)


def conv2d_backward(x, p, d_out, with_dx=True):
    """``with_dx=False`` skips the input gradient (first-layer shortcut)."""
    _check_conv_input(x, p)
    dx, dw, db = backend.conv2d_backward(x, p.weights, d_out, p.pad, with_dx)
    return LayerGrad(dw, db, dx)


def maxpool2(x):
    """2x2 max pooling with stride 2.  Returns the pooled map and a record of
    each window's argmax (0..3, row-major) for the backward pass."""
    N, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ValueError(f"odd spatial extent for 2x2 pooling: H={H}, W={W}")
    win = x.reshape(N, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = win.reshape(N, C, H // 2, W // 2, 4)
    arg = flat.argmax(axis=-1)  # first occurrence wins ties
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool2_backward(d_out, argmax):
    """Route each output gradient to its recorded argmax position."""
    N, C, Ho, Wo = d_out.shape
    flat = np.zeros((N, C, Ho, Wo, 4))
    np.put_along_axis(flat, argmax[..., None], d_out[..., None], axis=-1)
    win = flat.reshape(N, C, Ho, Wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(win.reshape(N, C, 2 * Ho, 2 * Wo))


def upsample2_nearest(x):
    """Replicate each pixel into a 2x2 block."""
    return np.ascontiguousarray(x.repeat(2, axis=2).repeat(2, axis=3))


def upsample2_backward(d_out):
    """Sum the gradients of each replicated 2x2 block."""
    N, C, H, W = d_out.shape
    return d_out.reshape(N, C, H // 2, 2, W // 2, 2).sum(axis=(3, 5))


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, d_out):
    # derivative at exactly 0 is defined as 0
    return np.where(x > 0, d_out, 0.0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y, d_out):
    """Backward from the forward output ``y = sigmoid(x)``."""
    return d_out * y * (1.0 - y)


def softmax_channels(x):
    """Per-pixel softmax over the channel axis, stabilized by max-subtraction."""
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_channels_backward(y, d_out):
    """Backward from the forward output ``y = softmax_channels(x)``."""
    dot = (d_out * y).sum(axis=1, keepdims=True)
    return y * (d_out - dot)
