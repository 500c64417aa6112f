# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for convolution lowering and 2x2 max pooling.

Drop-in replacements for the functions in ``_pykernels``; results are
bit-identical to the numpy versions.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = h - kh + 1, ow = w - kw + 1
    cdef Py_ssize_t ncols = c * kh * kw
    dtype = np.float32 if real is float else np.float64
    out = np.empty((n * oh * ow, ncols), dtype=dtype)
    cdef real[:, ::1] col = out
    cdef Py_ssize_t b, ch, i, j, ky, kx, row, k
    with nogil:
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    row = (b * oh + i) * ow + j
                    k = 0
                    for ch in range(c):
                        for ky in range(kh):
                            for kx in range(kw):
                                col[row, k] = x[b, ch, i + ky, j + kx]
                                k += 1
    return out


def col2im(real[:, ::1] col, shape, Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t oh = h - kh + 1, ow = w - kw + 1
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] img = out
    cdef Py_ssize_t b, ch, i, j, ky, kx, k
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ky in range(kh):
                    for kx in range(kw):
                        k = (ch * kh + ky) * kw + kx
                        for i in range(oh):
                            for j in range(ow):
                                img[b, ch, i + ky, j + kx] += col[(b * oh + i) * ow + j, k]
    return out


def maxpool2x2_forward(real[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t oh = x.shape[2] // 2, ow = x.shape[3] // 2
    dtype = np.float32 if real is float else np.float64
    out = np.empty((n, c, oh, ow), dtype=dtype)
    arg = np.empty((n, c, oh, ow), dtype=np.int8)
    cdef real[:, :, :, ::1] o = out
    cdef cnp.int8_t[:, :, :, ::1] a = arg
    cdef Py_ssize_t b, ch, i, j
    cdef real best, v
    cdef cnp.int8_t bi
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(oh):
                    for j in range(ow):
                        best = x[b, ch, 2 * i, 2 * j]
                        bi = 0
                        v = x[b, ch, 2 * i, 2 * j + 1]
                        if v > best:
                            best = v
                            bi = 1
                        v = x[b, ch, 2 * i + 1, 2 * j]
                        if v > best:
                            best = v
                            bi = 2
                        v = x[b, ch, 2 * i + 1, 2 * j + 1]
                        if v > best:
                            best = v
                            bi = 3
                        o[b, ch, i, j] = best
                        a[b, ch, i, j] = bi
    return out, arg


def maxpool2x2_backward(real[:, :, :, ::1] grad, cnp.int8_t[:, :, :, ::1] arg, shape):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] dx = out
    cdef Py_ssize_t b, ch, i, j
    cdef cnp.int8_t k
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(oh):
                    for j in range(ow):
                        k = arg[b, ch, i, j]
                        dx[b, ch, 2 * i + k // 2, 2 * j + k % 2] = grad[b, ch, i, j]
    return out
