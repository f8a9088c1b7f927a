"""Encoder-decoder segmentation networks built from the layer primitives.

A network of pooling depth d consists of d encoder stages
[conv3x3 -> relu -> conv3x3 -> relu -> maxpool2], d mirrored decoder stages
[upsample2 -> conv3x3 -> relu], and a 1x1 classifier head (sigmoid for a
single output channel, raw logits otherwise).  All convolutions use zero
padding, so predictions keep the input's spatial size.

Only the first convolution widens when location channels are added, which
is why the parameter count grows by exactly k*9*widths[0] for k extra input
channels.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .augment import NORMS, VARIANTS, AugmentSpec
from .layers import (
    ConvParams,
    conv2d,
    conv2d_backward,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    upsample2_backward,
    upsample2_nearest,
)
from .tensor import read_tensor, write_tensor

MODEL_MAGIC = b"LNET"
MODEL_VERSION = 1
MAX_DEPTH = 5
DEFAULT_WIDTHS = (16, 32, 64, 128, 256)


class ModelFormatError(ValueError):
    """Raised for malformed or incompatible model files."""


@dataclass
class SegNet:
    depth: int
    widths: tuple
    spec: AugmentSpec
    out_channels: int
    seed: int
    convs: list = field(default_factory=list)

    @property
    def in_channels(self):
        return self.spec.in_channels

    def params(self):
        """Flat list of parameter arrays in layer order (w0, b0, w1, b1, ...)."""
        out = []
        for p in self.convs:
            out.append(p.weights)
            out.append(p.bias)
        return out


def _he_weights(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def build(depth, spec, widths=None, out_channels=1, seed=0):
    """Construct a seeded network.  Identical arguments give bit-identical
    parameters; networks differing only in input variant share the
    initialization of every equal-shape parameter."""
    if not isinstance(depth, int) or not 1 <= depth <= MAX_DEPTH:
        raise ValueError(f"invalid depth {depth}: must be an integer in 1..{MAX_DEPTH}")
    if widths is None:
        widths = DEFAULT_WIDTHS[:depth]
    widths = tuple(int(w) for w in widths)
    if len(widths) == 0:
        raise ValueError("widths must not be empty")
    if len(widths) != depth:
        raise ValueError(f"widths length {len(widths)} != depth {depth}")
    if any(w < 1 for w in widths):
        raise ValueError(f"widths must be positive, got {widths}")
    if out_channels < 1:
        raise ValueError("out_channels must be >= 1")

    n_convs = 3 * depth + 1
    # one independent seed stream per layer: widening the first conv must not
    # shift the draws of any later layer
    streams = np.random.SeedSequence(seed).spawn(n_convs)
    convs = []

    def make_conv(stream, cin, cout, k):
        rng = np.random.default_rng(stream)
        w = _he_weights(rng, (cout, cin, k, k), cin * k * k)
        return ConvParams(w, np.zeros(cout), "zero")

    # first conv: the rgb block and the location block come from separate
    # sub-streams so the rgb block matches across variants
    base_s, extra_s = streams[0].spawn(2)
    cin = spec.in_channels
    fan = cin * 9
    w_base = _he_weights(np.random.default_rng(base_s), (widths[0], 3, 3, 3), fan)
    if spec.extra_channels:
        w_extra = _he_weights(
            np.random.default_rng(extra_s), (widths[0], spec.extra_channels, 3, 3), fan
        )
        w0 = np.concatenate([w_base, w_extra], axis=1)
    else:
        w0 = w_base
    convs.append(ConvParams(np.ascontiguousarray(w0), np.zeros(widths[0]), "zero"))

    k = 1
    prev = widths[0]
    for s in range(depth):
        if s > 0:
            convs.append(make_conv(streams[k], prev, widths[s], 3))
            k += 1
            prev = widths[s]
        convs.append(make_conv(streams[k], prev, prev, 3))
        k += 1
    for i in range(depth):
        dec_w = widths[max(depth - 2 - i, 0)]
        convs.append(make_conv(streams[k], prev, dec_w, 3))
        k += 1
        prev = dec_w
    convs.append(make_conv(streams[k], prev, out_channels, 1))

    return SegNet(depth, widths, spec, out_channels, seed, convs)


def _plan(net):
    ops = []
    k = 0
    for _ in range(net.depth):
        ops += [("conv", k), ("relu", None), ("conv", k + 1), ("relu", None), ("pool", None)]
        k += 2
    for _ in range(net.depth):
        ops += [("up", None), ("conv", k), ("relu", None)]
        k += 1
    ops.append(("conv", k))
    if net.out_channels == 1:
        ops.append(("sigmoid", None))
    return ops


def _check_input(net, x):
    if x.ndim != 4:
        raise ValueError(f"expected [N,C,H,W] input, got rank {x.ndim}")
    if x.shape[1] != net.in_channels:
        raise ValueError(
            f"channel mismatch: network expects {net.in_channels} input channels "
            f"({net.spec.variant}), got {x.shape[1]}"
        )
    step = 2**net.depth
    for axis, extent in (("H", x.shape[2]), ("W", x.shape[3])):
        if extent % step:
            raise ValueError(
                f"axis {axis}={extent} not divisible by 2^{net.depth}={step}"
            )


def forward(net, x, with_caches=False):
    """Run the network.  With ``with_caches`` the per-op records needed by
    :func:`backward` are returned alongside the prediction."""
    _check_input(net, x)
    caches = []
    h = x
    for op in _plan(net):
        kind = op[0]
        if kind == "conv":
            caches.append(h)
            h = conv2d(h, net.convs[op[1]])
        elif kind == "relu":
            caches.append(h)
            h = relu(h)
        elif kind == "pool":
            h, arg = maxpool2(h)
            caches.append(arg)
        elif kind == "up":
            caches.append(None)
            h = upsample2_nearest(h)
        else:  # sigmoid
            h = sigmoid(h)
            caches.append(h)
    if with_caches:
        return h, caches
    return h


def backward(net, caches, d_pred, with_dx=False):
    """Backpropagate d(loss)/d(prediction) through cached activations.

    Returns (grads, d_input) where grads[i] = (d_weights, d_bias) for conv i.
    The input gradient is only computed when ``with_dx`` is set; training
    never needs it.
    """
    grads = [None] * len(net.convs)
    g = d_pred
    ops = _plan(net)
    for op, cache in zip(reversed(ops), reversed(caches)):
        kind = op[0]
        if kind == "conv":
            lg = conv2d_backward(cache, net.convs[op[1]], g,
                                 with_dx=with_dx or op[1] > 0)
            grads[op[1]] = (lg.d_weights, lg.d_bias)
            g = lg.d_input
        elif kind == "relu":
            g = relu_backward(cache, g)
        elif kind == "pool":
            g = maxpool2_backward(g, cache)
        elif kind == "up":
            g = upsample2_backward(g)
        else:
            g = sigmoid_backward(cache, g)
    return grads, g


def param_count(net):
    return sum(p.size for p in net.params())


def save_model(net):
    """Serialize architecture + parameters.  Parameter tensors are stored in
    the 32-bit LAUG format, so saving is the one lossy step (documented)."""
    head = MODEL_MAGIC
    head += struct.pack("<IIII", MODEL_VERSION, net.depth, net.out_channels, len(net.widths))
    head += struct.pack(f"<{len(net.widths)}I", *net.widths)
    head += struct.pack(
        "<BBHQ",
        VARIANTS.index(net.spec.variant),
        NORMS.index(net.spec.normalization),
        0,
        net.seed,
    )
    blobs = []
    for t in net.params():
        blob = write_tensor(t if t.ndim else t.reshape(1))
        blobs.append(struct.pack("<I", len(blob)) + blob)
    return head + struct.pack("<I", len(blobs)) + b"".join(blobs)


def load_model(buf):
    if len(buf) < 20 or buf[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic {buf[:4]!r}")
    version, depth, out_channels, nw = struct.unpack_from("<IIII", buf, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    off = 20
    if not 1 <= depth <= MAX_DEPTH or not 1 <= nw <= MAX_DEPTH:
        raise ModelFormatError("corrupt header: implausible depth")
    widths = struct.unpack_from(f"<{nw}I", buf, off)
    off += 4 * nw
    var_i, norm_i, _, seed = struct.unpack_from("<BBHQ", buf, off)
    off += 12
    if var_i >= len(VARIANTS) or norm_i >= len(NORMS):
        raise ModelFormatError("corrupt header: unknown variant/normalization code")
    spec = AugmentSpec(VARIANTS[var_i], NORMS[norm_i])
    net = build(depth, spec, widths, out_channels, seed)

    (n_tensors,) = struct.unpack_from("<I", buf, off)
    off += 4
    params = net.params()
    if n_tensors != len(params):
        raise ModelFormatError(
            f"tensor count {n_tensors} does not match architecture ({len(params)})"
        )
    for t in params:
        if off + 4 > len(buf):
            raise ModelFormatError("truncated tensor table")
        (blen,) = struct.unpack_from("<I", buf, off)
        off += 4
        if off + blen > len(buf):
            raise ModelFormatError("truncated tensor payload")
        loaded = read_tensor(buf[off : off + blen])
        off += blen
        if loaded.shape != t.shape:
            raise ModelFormatError(
                f"parameter shape {loaded.shape} does not match architecture {t.shape}"
            )
        t[...] = loaded
    if off != len(buf):
        raise ModelFormatError("trailing bytes after last tensor")
    return net
