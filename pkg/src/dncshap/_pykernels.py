"""Numpy implementations of the convolution and pooling kernels.

These are the fallback used when the compiled ``_ckernels`` extension is not
available. All arrays are float64, NHWC, C-contiguous. Convolution inputs are
expected to be padded already.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, kh, kw, stride):
    # (N, Ho, Wo, C, kh, kw) view, no copy yet
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))
    return win[:, ::stride, ::stride]


def conv2d_forward(x, w, b, stride):
    kh, kw = w.shape[0], w.shape[1]
    win = _windows(x, kh, kw, stride)
    y = np.tensordot(win, w, axes=([3, 4, 5], [2, 0, 1]))
    y += b
    return np.ascontiguousarray(y)


def conv2d_backward(x, w, dy, stride):
    kh, kw = w.shape[0], w.shape[1]
    ho, wo = dy.shape[1], dy.shape[2]
    win = _windows(x, kh, kw, stride)
    dw = np.tensordot(win, dy, axes=([0, 1, 2], [0, 1, 2]))  # (C, kh, kw, F)
    dw = np.ascontiguousarray(dw.transpose(1, 2, 0, 3))
    db = dy.sum(axis=(0, 1, 2))
    dcols = np.tensordot(dy, w, axes=([3], [3]))  # (N, Ho, Wo, kh, kw, C)
    dx = np.zeros_like(x)
    for p in range(kh):
        for q in range(kw):
            dx[:, p:p + stride * (ho - 1) + 1:stride, q:q + stride * (wo - 1) + 1:stride, :] += dcols[:, :, :, p, q, :]
    return dx, dw, db


def maxpool_forward(x, size):
    n, h, w, c = x.shape
    ho, wo = h // size, w // size
    xr = x[:, :ho * size, :wo * size].reshape(n, ho, size, wo, size, c)
    xr = xr.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, size * size)
    idx = xr.argmax(axis=-1)
    y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx.astype(np.intp)


def maxpool_backward(dy, idx, x_shape, size):
    n, h, w, c = x_shape
    ho, wo = dy.shape[1], dy.shape[2]
    dxr = np.zeros((n, ho, wo, c, size * size))
    np.put_along_axis(dxr, idx[..., None], dy[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :ho * size, :wo * size] = (
        dxr.reshape(n, ho, wo, c, size, size).transpose(0, 1, 4, 2, 5, 3).reshape(n, ho * size, wo * size, c)
    )
    return dx
