"""NumPy implementation of the convolution kernels.

Forward and backward passes are expressed as tensordot contractions over
strided sliding-window views.  This is the fallback used when the compiled
extension is unavailable; results may differ from it only in float rounding
(different but fixed summation order).
"""

import numpy as np

NAME = "python"


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _windows(xp, K, Ho, Wo):
    # [N,C,Ho,Wo,K,K] view over the padded input, no copy
    N, C = xp.shape[:2]
    sn, sc, sh, sw = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (N, C, Ho, Wo, K, K), (sn, sc, sh, sw, sh, sw), writeable=False
    )


def conv2d_forward(x, w, b, pad):
    """Cross-correlate [N,Ci,H,W] with [Co,Ci,K,K] at stride 1."""
    K = w.shape[2]
    N, _, H, W = x.shape
    Ho, Wo = H + 2 * pad - K + 1, W + 2 * pad - K + 1
    win = _windows(_pad(x, pad), K, Ho, Wo)
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # [N,Ho,Wo,Co]
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    y += b[None, :, None, None]
    return y


def conv2d_backward(x, w, d_out, pad, with_dx=True):
    """Gradients of conv2d_forward; dx is skipped when with_dx is false."""
    K = w.shape[2]
    N, Ci, H, W = x.shape
    db = d_out.sum(axis=(0, 2, 3))
    win = _windows(_pad(x, pad), K, d_out.shape[2], d_out.shape[3])
    dw = np.tensordot(d_out, win, axes=([0, 2, 3], [0, 2, 3]))  # [Co,Ci,K,K]
    if not with_dx:
        return None, np.ascontiguousarray(dw), db
    # full correlation of the padded output gradient with the rotated kernel
    gwin = _windows(_pad(d_out, K - 1 - pad), K, H, W)
    wr = w[:, :, ::-1, ::-1]
    dx = np.tensordot(gwin, wr, axes=([1, 4, 5], [0, 2, 3]))  # [N,H,W,Ci]
    dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
    return dx, np.ascontiguousarray(dw), db
