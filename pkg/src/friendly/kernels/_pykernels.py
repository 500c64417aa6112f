"""Pure-numpy reference kernels for convolution lowering and 2x2 max pooling.

These are the fallback when the compiled ``_ckernels`` extension is not
available. Both backends must produce bit-identical results; col2im in
particular accumulates overlapping windows in (ky, kx) order so that the
floating-point summation order matches the compiled loop.
"""

import numpy as np


def im2col(x, kh, kw):
    """Lower a [N, C, H, W] batch to a [N*oh*ow, C*kh*kw] patch matrix (stride 1)."""
    n, c, h, w = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    col = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for ky in range(kh):
        for kx in range(kw):
            col[:, :, ky, kx, :, :] = x[:, :, ky:ky + oh, kx:kx + ow]
    return np.ascontiguousarray(col.transpose(0, 4, 5, 1, 2, 3).reshape(n * oh * ow, c * kh * kw))


def col2im(col, shape, kh, kw):
    """Adjoint of :func:`im2col`: scatter-add patch rows back to image layout."""
    n, c, h, w = shape
    oh, ow = h - kh + 1, w - kw + 1
    colr = col.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    out = np.zeros(shape, dtype=col.dtype)
    for ky in range(kh):
        for kx in range(kw):
            out[:, :, ky:ky + oh, kx:kx + ow] += colr[:, :, ky, kx, :, :]
    return out


def maxpool2x2_forward(x):
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    win = (x[:, :, :2 * oh, :2 * ow]
           .reshape(n, c, oh, 2, ow, 2)
           .transpose(0, 1, 2, 4, 3, 5)
           .reshape(n, c, oh, ow, 4))
    arg = np.argmax(win, axis=-1).astype(np.int8)
    out = np.take_along_axis(win, arg[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool2x2_backward(grad, arg, shape):
    n, c, h, w = shape
    oh, ow = h // 2, w // 2
    win = np.zeros((n, c, oh, ow, 4), dtype=grad.dtype)
    np.put_along_axis(win, arg[..., None].astype(np.intp), grad[..., None], axis=-1)
    out = np.zeros(shape, dtype=grad.dtype)
    out[:, :, :2 * oh, :2 * ow] = (win.reshape(n, c, oh, ow, 2, 2)
                                   .transpose(0, 1, 2, 4, 3, 5)
                                   .reshape(n, c, 2 * oh, 2 * ow))
    return out
