import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from friendly import kernels
from friendly.kernels import _pykernels

needs_ext = pytest.mark.skipif("cython" not in kernels.available_backends(),
                               reason="compiled kernels not built")


def test_backend_selection():
    assert kernels.BACKEND in kernels.available_backends()
    assert kernels.get_backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_im2col_layout():
    x = np.arange(9.0).reshape(1, 1, 3, 3)
    col = _pykernels.im2col(x, 2, 2)
    # each row is one output position, columns run over (channel, ky, kx)
    np.testing.assert_array_equal(col[0], [0, 1, 3, 4])
    np.testing.assert_array_equal(col[-1], [4, 5, 7, 8])


def test_col2im_is_adjoint_of_im2col():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 5, 4))
    col = _pykernels.im2col(x, 3, 2)
    c = rng.normal(size=col.shape)
    lhs = np.sum(col * c)
    rhs = np.sum(x * _pykernels.col2im(c, x.shape, 3, 2))
    assert abs(lhs - rhs) < 1e-10


def test_maxpool_ties_go_to_first():
    x = np.zeros((1, 1, 2, 2))
    out, arg = _pykernels.maxpool2x2_forward(x)
    assert out[0, 0, 0, 0] == 0.0 and arg[0, 0, 0, 0] == 0


def test_maxpool_odd_size_drops_edge():
    x = np.arange(15.0).reshape(1, 1, 3, 5)
    out, _ = _pykernels.maxpool2x2_forward(x)
    assert out.shape == (1, 1, 1, 2)
    np.testing.assert_array_equal(out[0, 0, 0], [6.0, 8.0])


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(3, 9), st.integers(3, 9), st.integers(1, 3),
       st.integers(1, 3), st.sampled_from([np.float64, np.float32]), st.integers(0, 2**31 - 1))
def test_backends_agree_bitwise(n, c, h, w, kh, kw, dtype, seed):
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, c, h, w)).astype(dtype)
    a, b = py.im2col(x, kh, kw), cy.im2col(x, kh, kw)
    assert a.dtype == b.dtype == dtype
    assert a.tobytes() == b.tobytes()
    g = rng.normal(size=a.shape).astype(dtype)
    assert py.col2im(g, x.shape, kh, kw).tobytes() == cy.col2im(g, x.shape, kh, kw).tobytes()
    if h >= 2 and w >= 2:
        (o1, i1), (o2, i2) = py.maxpool2x2_forward(x), cy.maxpool2x2_forward(x)
        assert o1.tobytes() == o2.tobytes() and i1.tobytes() == i2.tobytes()
        gp = rng.normal(size=o1.shape).astype(dtype)
        assert (py.maxpool2x2_backward(gp, i1, x.shape).tobytes()
                == cy.maxpool2x2_backward(gp, i1, x.shape).tobytes())


@needs_ext
def test_ties_agree_across_backends():
    x = np.ones((2, 2, 4, 4))
    (o1, i1), (o2, i2) = (kernels.get_backend(b).maxpool2x2_forward(x) for b in ("python", "cython"))
    np.testing.assert_array_equal(i1, i2)
