"""Pixelwise losses and the two optimizers used for training.

Adam uses decoupled weight decay (theta is shrunk by lr*wd before the Adam
delta), which keeps wd=0 exactly equivalent to plain Adam.  SGD uses the
classic momentum recurrence v <- mu*v - lr*(g + wd*theta); theta <- theta + v.

On the quadratic f(theta) = 0.5*||theta||^2, SGD with momentum decreases f
monotonically when lr <= (1 - sqrt(mu))^2 (real, overdamped roots); Adam
decreases it monotonically while |theta| stays well above lr.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

IGNORE_CLASS = 255
_CLAMP = 1e-12

STATE_MAGIC = b"LOPT"
STATE_VERSION = 1


def bce_loss(pred, target):
    """Mean binary cross-entropy and its gradient w.r.t. ``pred``.

    ``pred`` is clamped into (0,1) at 1e-12 before the logs; targets are 0/1.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    p = np.clip(pred, _CLAMP, 1.0 - _CLAMP)
    n = p.size
    loss = -(target * np.log(p) + (1.0 - target) * np.log1p(-p)).sum() / n
    d_pred = (p - target) / (p * (1.0 - p)) / n
    return loss, d_pred


def softmax_ce_loss(logits, classes, ignore=IGNORE_CLASS):
    """Mean softmax cross-entropy over non-ignored pixels.

    ``logits`` is [N,K,H,W]; ``classes`` is [N,H,W] with values in 0..K-1 or
    the ignore value.  The gradient is zero at ignored pixels.
    """
    N, K, H, W = logits.shape
    cls = np.asarray(classes)
    if cls.shape != (N, H, W):
        raise ValueError(f"class map shape {cls.shape} != {(N, H, W)}")
    cls = cls.astype(np.int64)
    valid = cls != ignore
    if np.any((cls < 0) & valid) or np.any((cls >= K) & valid):
        raise ValueError(f"class values must be in 0..{K - 1} or {ignore}")
    n_valid = int(valid.sum())
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    if n_valid == 0:
        return 0.0, np.zeros_like(logits)
    safe = np.where(valid, cls, 0)
    picked = np.take_along_axis(logp, safe[:, None], axis=1)[:, 0]
    loss = -(picked * valid).sum() / n_valid
    d = np.exp(logp)
    onehot = np.zeros_like(d)
    np.put_along_axis(onehot, safe[:, None], 1.0, axis=1)
    d = (d - onehot) * valid[:, None] / n_valid
    return loss, d


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-6
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def init(cls, params, **kw):
        st = cls(**kw)
        st.m = [np.zeros_like(p) for p in params]
        st.v = [np.zeros_like(p) for p in params]
        return st


def adam_step(params, grads, state):
    """One bias-corrected Adam update, in place on ``params``."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if state.weight_decay:
            p *= 1.0 - state.lr * state.weight_decay
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class SgdState:
    lr: float = 1e-4
    momentum: float = 0.99
    weight_decay: float = 5e-4
    t: int = 0
    v: list = field(default_factory=list)

    @classmethod
    def init(cls, params, **kw):
        st = cls(**kw)
        st.v = [np.zeros_like(p) for p in params]
        return st


def sgd_momentum_step(params, grads, state):
    """One heavy-ball step: v <- mu*v - lr*(g + wd*theta); theta <- theta + v."""
    state.t += 1
    for p, g, v in zip(params, grads, state.v):
        v *= state.momentum
        v -= state.lr * (g + state.weight_decay * p)
        p += v


def save_state(state):
    """Serialize optimizer state bit-exactly (float64 payload)."""
    if isinstance(state, AdamState):
        kind, hyper, bufs = 0, (state.lr, state.beta1, state.beta2, state.eps, state.weight_decay, 0.0), state.m + state.v
    elif isinstance(state, SgdState):
        kind, hyper, bufs = 1, (state.lr, 0.0, 0.0, 0.0, state.weight_decay, state.momentum), state.v
    else:
        raise TypeError(f"unknown optimizer state {type(state).__name__}")
    out = STATE_MAGIC + struct.pack("<IBQ", STATE_VERSION, kind, state.t)
    out += struct.pack("<6d", *hyper)
    out += struct.pack("<I", len(bufs))
    for a in bufs:
        out += struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape)
        out += a.astype("<f8").tobytes()
    return out


def load_state(buf):
    if buf[:4] != STATE_MAGIC:
        raise ValueError(f"bad magic {buf[:4]!r}")
    version, kind, t = struct.unpack_from("<IBQ", buf, 4)
    if version != STATE_VERSION:
        raise ValueError(f"unsupported optimizer state version {version}")
    off = 17
    hyper = struct.unpack_from("<6d", buf, off)
    off += 48
    (n,) = struct.unpack_from("<I", buf, off)
    off += 4
    bufs = []
    for _ in range(n):
        (rank,) = struct.unpack_from("<I", buf, off)
        off += 4
        shape = struct.unpack_from(f"<{rank}I", buf, off)
        off += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        a = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
        bufs.append(a)
    if kind == 0:
        st = AdamState(lr=hyper[0], beta1=hyper[1], beta2=hyper[2], eps=hyper[3], weight_decay=hyper[4], t=t)
        half = len(bufs) // 2
        st.m, st.v = bufs[:half], bufs[half:]
    else:
        st = SgdState(lr=hyper[0], weight_decay=hyper[4], momentum=hyper[5], t=t)
        st.v = bufs
    return st
