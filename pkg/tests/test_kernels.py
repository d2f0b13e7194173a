import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import logsumexp

from entropy_lattice import _kernels_py, kernels

try:
    from entropy_lattice import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

needs_ext = pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")
finite = st.floats(-700, 700, allow_nan=False)


def lse(mod, t, s, chunk=4096):
    cs, cl = mod.chunk_logsumexp(np.ascontiguousarray(t, dtype=np.float64),
                                 np.ascontiguousarray(s, dtype=np.int8), chunk)
    return mod.tree_merge(cs, cl)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@given(arrays(np.float64, st.integers(1, 300), elements=finite), st.integers(1, 64))
@settings(max_examples=60, deadline=None)
def test_fallback_matches_scipy(t, chunk):
    s, lg = lse(_kernels_py, t, np.ones(len(t)), chunk)
    assert s == 1
    assert lg == pytest.approx(logsumexp(t), rel=1e-13, abs=1e-12)


@needs_ext
@given(arrays(np.float64, st.integers(1, 300), elements=finite),
       arrays(np.int8, 300, elements=st.sampled_from([-1, 0, 1])), st.integers(1, 64))
@settings(max_examples=80, deadline=None)
def test_backends_agree_signed(t, signs, chunk):
    sg = signs[: len(t)]
    a = lse(_kernels_py, t, sg, chunk)
    b = lse(_kernels_c, t, sg, chunk)
    assert a[0] == b[0]
    if a[0] != 0:
        assert a[1] == pytest.approx(b[1], rel=1e-13, abs=1e-13)


def test_signed_cancellation_to_zero():
    s, lg = lse(_kernels_py, [1.0, 1.0], [1, -1])
    assert s == 0 and lg == -np.inf


def test_huge_exponents_do_not_overflow():
    t = np.array([1e6, 1e6 - 1.0, 5e5])
    s, lg = lse(kernels, t, np.ones(3))
    assert lg == pytest.approx(1e6 + np.log1p(np.exp(-1.0)), rel=1e-15)


@needs_ext
@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(1e-6, 1.0)))
@settings(max_examples=40, deadline=None)
def test_alias_tables_identical(w):
    p = w / w.sum()
    q1, J1 = _kernels_py.alias_build(p)
    q2, J2 = _kernels_c.alias_build(p)
    np.testing.assert_array_equal(J1, J2)
    np.testing.assert_allclose(q1, q2, rtol=1e-13, atol=1e-15)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(1e-4, 1.0)))
@settings(max_examples=40, deadline=None)
def test_alias_table_encodes_distribution(w):
    p = w / w.sum()
    q, J = kernels.alias_build(p)
    K = len(p)
    recon = q / K
    np.add.at(recon, J, (1.0 - q) / K)
    np.testing.assert_allclose(recon, p, atol=1e-12)
