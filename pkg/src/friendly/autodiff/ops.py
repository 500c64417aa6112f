"""Differentiable primitives.

Every function accepts :class:`Tensor` or array-like inputs and returns a
Tensor. When at least one input is attached to a tape and needs a gradient,
the application is recorded together with its vector-Jacobian product.
"""

import numpy as np

from .. import kernels
from .tape import Tensor, debug_enabled


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _value(x):
    # python scalars stay weakly typed so float32 arrays are not upcast
    if isinstance(x, (int, float)):
        return x
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _shape(x):
    return np.shape(_value(x))


def _tape_of(op, inputs):
    tape = None
    for t in inputs:
        if isinstance(t, Tensor) and t.tape is not None:
            if tape is None:
                tape = t.tape
            elif t.tape is not tape:
                raise ValueError(f"{op}: inputs belong to different tapes")
    return tape


def _needs(*inputs):
    return tuple(isinstance(t, Tensor) and t.index is not None for t in inputs)


def _emit(op, value, inputs, vjp):
    tape = _tape_of(op, inputs)
    if tape is None:
        if debug_enabled() and not np.all(np.isfinite(value)):
            raise FloatingPointError(f"{op}: non-finite value in forward output")
        return Tensor(value)
    return tape.record(op, value, inputs, vjp)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _shape_error(op, a, b):
    return ValueError(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")


# ---------------------------------------------------------------- arithmetic

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    av, bv = a.data, b.data
    na, nb = _needs(a, b)

    def vjp(g):
        return (g @ bv.T if na else None, av.T @ g if nb else None)

    return _emit("matmul", av @ bv, (a, b), vjp)


def add(a, b):
    try:
        out = _value(a) + _value(b)
    except ValueError:
        raise _shape_error("add", _shape(a), _shape(b)) from None
    sa, sb = _shape(a), _shape(b)
    na, nb = _needs(a, b)

    def vjp(g):
        return (_unbroadcast(g, sa) if na else None, _unbroadcast(g, sb) if nb else None)

    return _emit("add", np.asarray(out), (a, b), vjp)


def sub(a, b):
    try:
        out = _value(a) - _value(b)
    except ValueError:
        raise _shape_error("sub", _shape(a), _shape(b)) from None
    sa, sb = _shape(a), _shape(b)
    na, nb = _needs(a, b)

    def vjp(g):
        return (_unbroadcast(g, sa) if na else None, -_unbroadcast(g, sb) if nb else None)

    return _emit("sub", np.asarray(out), (a, b), vjp)


def mul(a, b):
    """Elementwise product with broadcasting; ``b`` may be a python scalar."""
    av, bv = _value(a), _value(b)
    try:
        out = av * bv
    except ValueError:
        raise _shape_error("mul", np.shape(av), np.shape(bv)) from None
    na, nb = _needs(a, b)

    def vjp(g):
        return (_unbroadcast(g * bv, np.shape(av)) if na else None,
                _unbroadcast(g * av, np.shape(bv)) if nb else None)

    return _emit("mul", np.asarray(out), (a, b), vjp)


def square(x):
    x = _as_tensor(x)
    xv = x.data

    def vjp(g):
        return (2.0 * xv * g,)

    return _emit("square", xv * xv, (x,), vjp)


def sum(x, axis=None):
    x = _as_tensor(x)
    shape = x.shape

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _emit("sum", np.sum(x.data, axis=axis), (x,), vjp)


def mean(x, axis=None):
    x = _as_tensor(x)
    shape = x.shape
    count = x.data.size if axis is None else shape[axis]

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape).copy(),)

    return _emit("mean", np.mean(x.data, axis=axis), (x,), vjp)


def reshape(x, shape):
    x = _as_tensor(x)
    orig = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise _shape_error("reshape", orig, shape) from None

    def vjp(g):
        return (g.reshape(orig),)

    return _emit("reshape", out, (x,), vjp)


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ValueError("concat: incompatible shapes "
                         + ", ".join(str(t.shape) for t in tensors)) from None
    cuts = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _emit("concat", out, tuple(tensors), vjp)


# -------------------------------------------------------------- activations

def tanh(x):
    x = _as_tensor(x)
    y = np.tanh(x.data)

    def vjp(g):
        return (g * (1.0 - y * y),)

    return _emit("tanh", y, (x,), vjp)


def relu(x):
    x = _as_tensor(x)
    mask = x.data > 0
    y = np.where(mask, x.data, 0.0).astype(x.data.dtype, copy=False)

    def vjp(g):
        return (g * mask,)

    return _emit("relu", y, (x,), vjp)


def _log_softmax(z, axis=-1):
    zmax = np.max(z, axis=axis, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(x, axis=-1):
    x = _as_tensor(x)
    y = np.exp(_log_softmax(x.data, axis))

    def vjp(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _emit("softmax", y, (x,), vjp)


def cross_entropy(logits, labels, reduction="mean"):
    """Log-softmax followed by negative log-likelihood.

    ``reduction`` is ``"mean"`` (over the batch), ``"sum"`` or ``"none"``.
    """
    logits = _as_tensor(logits)
    z = logits.data
    if z.ndim != 2:
        raise ValueError(f"cross_entropy: logits must be [batch, classes], got {z.shape}")
    labels = np.asarray(labels)
    b, c = z.shape
    if labels.shape != (b,):
        raise _shape_error("cross_entropy", z.shape, labels.shape)
    if b and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"cross_entropy: labels must lie in [0, {c})")
    logp = _log_softmax(z)
    rows = np.arange(b)
    per = -logp[rows, labels]
    if reduction == "mean":
        out = per.mean()
    elif reduction == "sum":
        out = per.sum()
    elif reduction == "none":
        out = per
    else:
        raise ValueError(f"cross_entropy: unknown reduction {reduction!r}")

    def vjp(g):
        d = np.exp(logp)
        d[rows, labels] -= 1.0
        if reduction == "mean":
            return (d * (g / b),)
        if reduction == "sum":
            return (d * g,)
        return (d * g[:, None],)

    return _emit("cross_entropy", np.asarray(out), (logits,), vjp)


# ------------------------------------------------------------ conv / pooling

def conv2d(x, weight, bias=None, padding=0):
    """Stride-1 convolution of [N, C, H, W] with [F, C, kh, kw] via im2col."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise _shape_error("conv2d", x.shape, weight.shape)
    f, c, kh, kw = weight.shape
    xv = x.data
    if padding:
        xv = np.pad(xv, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, _, h, w = xv.shape
    oh, ow = h - kh + 1, w - kw + 1
    if oh < 1 or ow < 1:
        raise _shape_error("conv2d", x.shape, weight.shape)
    cols = kernels.im2col(xv, kh, kw)
    wm = weight.data.reshape(f, -1)
    out = cols @ wm.T
    inputs = (x, weight)
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (f,):
            raise _shape_error("conv2d", weight.shape, bias.shape)
        out = out + bias.data
        inputs = (x, weight, bias)
    out = np.ascontiguousarray(out.reshape(n, oh, ow, f).transpose(0, 3, 1, 2))
    needs = _needs(*inputs)
    padded_shape = xv.shape

    def vjp(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, f)
        dx = None
        if needs[0]:
            dxp = kernels.col2im(g2 @ wm, padded_shape, kh, kw)
            dx = dxp[:, :, padding:h - padding, padding:w - padding] if padding else dxp
        dw = (g2.T @ cols).reshape(weight.shape) if needs[1] else None
        if len(inputs) == 3:
            return (dx, dw, g2.sum(axis=0) if needs[2] else None)
        return (dx, dw)

    return _emit("conv2d", out, inputs, vjp)


def maxpool2d(x):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    x = _as_tensor(x)
    if x.ndim != 4 or x.shape[2] < 2 or x.shape[3] < 2:
        raise ValueError(f"maxpool2d: expected [N, C, H>=2, W>=2], got {x.shape}")
    out, arg = kernels.maxpool2x2_forward(x.data)
    shape = x.shape

    def vjp(g):
        return (kernels.maxpool2x2_backward(g, arg, shape),)

    return _emit("maxpool2d", out, (x,), vjp)


def upsample2d(x):
    """Nearest-neighbour 2x upsampling of [N, C, H, W]."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"upsample2d: expected [N, C, H, W], got {x.shape}")
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def vjp(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return _emit("upsample2d", out, (x,), vjp)


# --------------------------------------------------- normalisation / dropout

def batchnorm1d(x, gamma, beta, running_mean=None, running_var=None, train=True,
                momentum=0.1, eps=1e-5):
    """Batch normalisation over the leading axis of [batch, features].

    In train mode batch statistics are used and, when running buffers are
    given, they are updated in place. Eval mode uses the running buffers.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise _shape_error("batchnorm1d", x.shape, gamma.shape)
    xv, gv = x.data, gamma.data
    b = xv.shape[0]
    if train:
        mu = xv.mean(axis=0)
        var = xv.var(axis=0)
        if running_mean is not None:
            unbiased = var * (b / (b - 1)) if b > 1 else var
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased
    else:
        if running_mean is None:
            raise ValueError("batchnorm1d: eval mode requires running statistics")
        mu, var = running_mean.copy(), running_var.copy()
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv_std
    out = gv * xhat + beta.data
    needs = _needs(x, gamma, beta)

    def vjp(g):
        dxhat = g * gv
        if not needs[0]:
            dx = None
        elif train:
            dx = inv_std / b * (b * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dx = dxhat * inv_std
        return (dx,
                (g * xhat).sum(axis=0) if needs[1] else None,
                g.sum(axis=0) if needs[2] else None)

    return _emit("batchnorm1d", out, (x, gamma, beta), vjp)


def dropout_mask(shape, rate, key, dtype=np.float64):
    """Inverted-dropout mask from a counter-based generator keyed by ``key``."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def dropout(x, rate, train=False, key=(0,)):
    """Eval mode returns ``x`` untouched; train mode applies a keyed mask."""
    x = _as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    mask = dropout_mask(x.shape, rate, key, x.data.dtype)

    def vjp(g):
        return (g * mask,)

    return _emit("dropout", x.data * mask, (x,), vjp)


# The primitive set exercised by the gradient checker, in report order.
PRIMITIVES = (
    "matmul", "add", "tanh", "relu", "softmax", "conv2d", "maxpool2d",
    "batchnorm1d", "dropout", "square", "sum", "mean", "concat",
    "sub", "mul", "reshape", "upsample2d", "cross_entropy",
)
