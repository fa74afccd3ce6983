# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled float32 kernels for the convolution/pooling hot path."""

import numpy as np

cimport numpy as cnp


def im2col(cnp.float32_t[:, :, ::1] x, Py_ssize_t k):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t oh = h - k + 1, ow = w - k + 1
    out = np.empty((c * k * k, oh * ow), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] o = out
    cdef Py_ssize_t ci, i, j, r, s, row
    for ci in range(c):
        for i in range(k):
            for j in range(k):
                row = (ci * k + i) * k + j
                for r in range(oh):
                    for s in range(ow):
                        o[row, r * ow + s] = x[ci, r + i, s + j]
    return out


def col2im(cnp.float32_t[:, ::1] cols, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
           Py_ssize_t k):
    cdef Py_ssize_t oh = h - k + 1, ow = w - k + 1
    out = np.zeros((c, h, w), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] o = out
    cdef Py_ssize_t ci, i, j, r, s, row
    for ci in range(c):
        for i in range(k):
            for j in range(k):
                row = (ci * k + i) * k + j
                for r in range(oh):
                    for s in range(ow):
                        o[ci, r + i, s + j] += cols[row, r * ow + s]
    return out


def maxpool2(cnp.float32_t[:, :, ::1] x):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    out = np.empty((c, oh, ow), dtype=np.float32)
    idx = np.empty((c, oh, ow), dtype=np.int64)
    cdef cnp.float32_t[:, :, ::1] o = out
    cdef cnp.int64_t[:, :, ::1] ix = idx
    cdef Py_ssize_t ci, r, s, i, j, best
    cdef cnp.float32_t v, m
    for ci in range(c):
        for r in range(oh):
            for s in range(ow):
                m = x[ci, 2 * r, 2 * s]
                best = 0
                for i in range(2):
                    for j in range(2):
                        v = x[ci, 2 * r + i, 2 * s + j]
                        if v > m:  # strict: first occurrence wins on ties
                            m = v
                            best = 2 * i + j
                o[ci, r, s] = m
                ix[ci, r, s] = best
    return out, idx


def maxpool2_backward(cnp.float32_t[:, :, ::1] dout, cnp.int64_t[:, :, ::1] idx,
                      Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t c = dout.shape[0], oh = dout.shape[1], ow = dout.shape[2]
    dx = np.zeros((c, h, w), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] o = dx
    cdef Py_ssize_t ci, r, s, b
    for ci in range(c):
        for r in range(oh):
            for s in range(ow):
                b = idx[ci, r, s]
                o[ci, 2 * r + b // 2, 2 * s + b % 2] = dout[ci, r, s]
    return dx
