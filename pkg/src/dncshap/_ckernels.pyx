# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled direct-loop kernels mirroring ``_pykernels``.

Loops run without the GIL so concurrent attribution workers overlap.
"""

import numpy as np


def conv2d_forward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                   const double[::1] b, Py_ssize_t stride):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], f = w.shape[3]
    cdef Py_ssize_t ho = (h - kh) // stride + 1, wo = (wd - kw) // stride + 1
    out = np.zeros((n, ho, wo, f))
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t s, i, j, p, q, ch, k
    cdef double xv
    with nogil:
        for s in range(n):
            for i in range(ho):
                for j in range(wo):
                    for p in range(kh):
                        for q in range(kw):
                            for ch in range(c):
                                xv = x[s, i * stride + p, j * stride + q, ch]
                                if xv == 0.0:
                                    continue
                                for k in range(f):
                                    y[s, i, j, k] += xv * w[p, q, ch, k]
                    for k in range(f):
                        y[s, i, j, k] += b[k]
    return out


def conv2d_backward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                    const double[:, :, :, ::1] dy, Py_ssize_t stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], f = w.shape[3]
    cdef Py_ssize_t ho = dy.shape[1], wo = dy.shape[2]
    dx_arr = np.zeros((x.shape[0], x.shape[1], x.shape[2], x.shape[3]))
    dw_arr = np.zeros((kh, kw, c, f))
    db_arr = np.zeros(f)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t s, i, j, p, q, ch, k, r, t
    cdef double xv, acc
    with nogil:
        for s in range(n):
            for i in range(ho):
                for j in range(wo):
                    for k in range(f):
                        db[k] += dy[s, i, j, k]
                    for p in range(kh):
                        r = i * stride + p
                        for q in range(kw):
                            t = j * stride + q
                            for ch in range(c):
                                xv = x[s, r, t, ch]
                                acc = 0.0
                                for k in range(f):
                                    dw[p, q, ch, k] += xv * dy[s, i, j, k]
                                    acc = acc + w[p, q, ch, k] * dy[s, i, j, k]
                                dx[s, r, t, ch] += acc
    return dx_arr, dw_arr, db_arr


def maxpool_forward(const double[:, :, :, ::1] x, Py_ssize_t size):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[3]
    cdef Py_ssize_t ho = x.shape[1] // size, wo = x.shape[2] // size
    out = np.empty((n, ho, wo, c))
    idx_arr = np.empty((n, ho, wo, c), dtype=np.intp)
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t s, i, j, ch, p, q, best
    cdef double v, m
    with nogil:
        for s in range(n):
            for i in range(ho):
                for j in range(wo):
                    for ch in range(c):
                        m = x[s, i * size, j * size, ch]
                        best = 0
                        for p in range(size):
                            for q in range(size):
                                v = x[s, i * size + p, j * size + q, ch]
                                if v > m:
                                    m = v
                                    best = p * size + q
                        y[s, i, j, ch] = m
                        idx[s, i, j, ch] = best
    return out, idx_arr


def maxpool_backward(const double[:, :, :, ::1] dy, const Py_ssize_t[:, :, :, ::1] idx,
                     tuple x_shape, Py_ssize_t size):
    dx_arr = np.zeros(x_shape)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t n = dy.shape[0], ho = dy.shape[1], wo = dy.shape[2], c = dy.shape[3]
    cdef Py_ssize_t s, i, j, ch, b
    with nogil:
        for s in range(n):
            for i in range(ho):
                for j in range(wo):
                    for ch in range(c):
                        b = idx[s, i, j, ch]
                        dx[s, i * size + b // size, j * size + b % size, ch] += dy[s, i, j, ch]
    return dx_arr
