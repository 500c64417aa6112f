"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports cleanly, unless the
environment variable ``FRIENDLY_PURE_PYTHON=1`` forces the fallback.
``BACKEND`` names the active implementation.
"""

import os

import numpy as np

from . import _pykernels

_native = None
if os.environ.get("FRIENDLY_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as _native
    except ImportError:  # extension not built
        _native = None

BACKEND = "cython" if _native is not None else "python"
_impl = _native if _native is not None else _pykernels


def available_backends():
    return ["python"] + (["cython"] if _native is not None else [])


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        if _native is None:
            raise ImportError("compiled kernels are not built")
        return _native
    raise ValueError(f"unknown kernel backend {name!r}")


def im2col(x, kh, kw):
    return _impl.im2col(np.ascontiguousarray(x), kh, kw)


def col2im(col, shape, kh, kw):
    return _impl.col2im(np.ascontiguousarray(col), tuple(shape), kh, kw)


def maxpool2x2_forward(x):
    return _impl.maxpool2x2_forward(np.ascontiguousarray(x))


def maxpool2x2_backward(grad, arg, shape):
    return _impl.maxpool2x2_backward(np.ascontiguousarray(grad), np.ascontiguousarray(arg), tuple(shape))
