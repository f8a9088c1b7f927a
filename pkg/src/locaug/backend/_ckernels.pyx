# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution kernels (OpenMP, float64).

Work is partitioned so that every output element is accumulated by exactly
one thread in a fixed order, keeping results bit-reproducible for any
thread count.  Inner loops run over contiguous rows that stay resident in
L1; dot products use a four-wide accumulator (a fixed, if not left-to-right,
summation order).
"""

import os

import numpy as np

from cython.parallel cimport prange

NAME = "compiled"

# the 2-core sandboxes this targets are usually contended; one thread is the
# safe default and LOCAUG_THREADS opts in to more
_THREADS = max(1, int(os.environ.get("LOCAUG_THREADS", "1")))


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _padded(x, Py_ssize_t p):
    if p == 0:
        return _c(x)
    N, C, H, W = x.shape
    xp = np.zeros((N, C, H + 2 * p, W + 2 * p))
    xp[:, :, p : p + H, p : p + W] = x
    return xp


cdef inline void _axpy(double wk, const double* x, double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        y[j] += wk * x[j]


cdef inline void _row3(const double* x0, const double* x1, const double* x2,
                       const double* wk, double* out, Py_ssize_t n) noexcept nogil:
    # out[j] += sum over the 3x3 taps; one fused pass keeps the output row
    # in registers instead of nine read-modify-write sweeps
    cdef Py_ssize_t j
    for j in range(n):
        out[j] += (wk[0] * x0[j] + wk[1] * x0[j + 1] + wk[2] * x0[j + 2]
                   + wk[3] * x1[j] + wk[4] * x1[j + 1] + wk[5] * x1[j + 2]
                   + wk[6] * x2[j] + wk[7] * x2[j + 1] + wk[8] * x2[j + 2])


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t j = 0
    while j + 4 <= n:
        s0 += a[j] * b[j]
        s1 += a[j + 1] * b[j + 1]
        s2 += a[j + 2] * b[j + 2]
        s3 += a[j + 3] * b[j + 3]
        j += 4
    while j < n:
        s0 += a[j] * b[j]
        j += 1
    return (s0 + s1) + (s2 + s3)


def conv2d_forward(x, w, b, int pad):
    """Cross-correlate [N,Ci,H,W] with [Co,Ci,K,K] at stride 1."""
    cdef double[:, :, :, ::1] xp = _padded(x, pad)
    cdef double[:, :, :, ::1] wv = _c(w)
    cdef double[::1] bv = _c(b)
    cdef Py_ssize_t N = x.shape[0], Ci = x.shape[1]
    cdef Py_ssize_t Co = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t Ho = x.shape[2] + 2 * pad - K + 1
    cdef Py_ssize_t Wo = x.shape[3] + 2 * pad - K + 1
    y = np.empty((N, Co, Ho, Wo))
    cdef double[:, :, :, ::1] yv = y
    cdef Py_ssize_t nc, n, co, ci, u, v, i, j
    cdef double* row

    for nc in prange(N * Co, nogil=True, schedule="static", num_threads=_THREADS):
        n = nc // Co
        co = nc % Co
        for i in range(Ho):
            row = &yv[n, co, i, 0]
            for j in range(Wo):
                row[j] = bv[co]
            for ci in range(Ci):
                if K == 3:
                    _row3(&xp[n, ci, i, 0], &xp[n, ci, i + 1, 0], &xp[n, ci, i + 2, 0],
                          &wv[co, ci, 0, 0], row, Wo)
                else:
                    for u in range(K):
                        for v in range(K):
                            _axpy(wv[co, ci, u, v], &xp[n, ci, i + u, v], row, Wo)
    return y


def conv2d_backward(x, w, d_out, int pad, bint with_dx=True):
    """Gradients of conv2d_forward; dx is skipped when with_dx is false."""
    cdef double[:, :, :, ::1] xp = _padded(x, pad)
    cdef double[:, :, :, ::1] g = _c(d_out)
    cdef Py_ssize_t N = x.shape[0], Ci = x.shape[1]
    cdef Py_ssize_t Co = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t Ho = d_out.shape[2], Wo = d_out.shape[3]

    db = np.ascontiguousarray(d_out.sum(axis=(0, 2, 3)))
    dw = np.zeros((Co, Ci, K, K))
    cdef double[:, :, :, ::1] dwv = dw
    cdef Py_ssize_t cc, n, co, ci, u, v, i

    for cc in prange(Co * Ci, nogil=True, schedule="static", num_threads=_THREADS):
        co = cc // Ci
        ci = cc % Ci
        for n in range(N):
            for i in range(Ho):
                for u in range(K):
                    for v in range(K):
                        dwv[co, ci, u, v] = dwv[co, ci, u, v] + _dot(
                            &g[n, co, i, 0], &xp[n, ci, i + u, v], Wo
                        )

    if not with_dx:
        return None, dw, db

    # the input gradient is a plain cross-correlation of the padded output
    # gradient with the rotated, channel-transposed kernel; reuse the forward
    wrt = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    dx = conv2d_forward(_padded(d_out, K - 1 - pad), wrt, np.zeros(Ci), 0)
    return dx, dw, db
