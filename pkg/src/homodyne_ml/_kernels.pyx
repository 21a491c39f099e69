# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-likelihood kernels.

Same surface as ``_fallback``. Sums use fixed-order pairwise reduction so a
given input always produces the same bits.
"""
from libc.math cimport log, M_PI

import numpy as np

cdef Py_ssize_t BLOCK = 128

cdef double _rss(const double[::1] x, const double[::1] m, double g,
                 Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t i, mid
    cdef double acc = 0.0, r
    if hi - lo <= BLOCK:
        for i in range(lo, hi):
            r = x[i] - g * m[i]
            acc += r * r
        return acc
    mid = lo + (hi - lo) // 2
    return _rss(x, m, g, lo, mid) + _rss(x, m, g, mid, hi)


cdef double _loglik(const double[::1] x, const double[::1] m,
                    double g, double s_sq) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0]
    return -0.5 * n * log(M_PI * s_sq) - _rss(x, m, g, 0, n) / s_sq


def residual_sumsq(const double[::1] x, const double[::1] m, double g):
    if x.shape[0] != m.shape[0]:
        raise ValueError("x and m must have equal length")
    cdef double out
    with nogil:
        out = _rss(x, m, g, 0, x.shape[0])
    return out


def loglik(const double[::1] x, const double[::1] m, double g, double s_sq):
    if x.shape[0] != m.shape[0]:
        raise ValueError("x and m must have equal length")
    cdef double out
    with nogil:
        out = _loglik(x, m, g, s_sq)
    return out


def loglik_grid(const double[::1] x, const double[::1] m,
                const double[::1] g, const double[::1] s_sq):
    cdef Py_ssize_t k, npts = g.shape[0]
    if x.shape[0] != m.shape[0] or s_sq.shape[0] != npts:
        raise ValueError("array lengths do not match")
    out = np.empty(npts, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(npts):
            o[k] = _loglik(x, m, g[k], s_sq[k])
    return out
