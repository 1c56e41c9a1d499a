import math

import mpmath
import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slcrf.errors import ConfigError
from slcrf.numerics import (as_dtype, column_shrink, frob2, norms, resolve_dtype, rotate180,
                            soft_threshold, softmax)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def mp_softmax(v):
    mpmath.mp.dps = 50
    e = [mpmath.e ** mpmath.mpf(float(x)) for x in v]
    s = sum(e)
    return np.array([float(x / s) for x in e])


@given(arrays(np.float64, st.integers(1, 8), elements=finite))
def test_softmax_matches_mpmath(v):
    npt.assert_allclose(softmax(v), mp_softmax(v), rtol=1e-12, atol=1e-300)


@given(arrays(np.float64, (4, 3), elements=finite), finite)
def test_softmax_shift_invariant_and_normalised(z, c):
    p = softmax(z, axis=0)
    npt.assert_allclose(p.sum(axis=0), 1.0, rtol=1e-12)
    npt.assert_allclose(softmax(z + c, axis=0), p, rtol=1e-9, atol=1e-15)
    assert np.all(p >= 0)


def test_softmax_extreme_logits_do_not_overflow():
    p = softmax(np.array([1000.0, 0.0, -1000.0]))
    npt.assert_array_equal(p, [1.0, 0.0, 0.0])


def test_softmax_uniform_and_errors():
    npt.assert_allclose(softmax(np.zeros(4)), 0.25)
    with pytest.raises(ValueError):
        softmax(np.array([]))
    with pytest.raises(ValueError):
        softmax(np.array([0.0, np.nan]))


def test_column_shrink_by_hand():
    Q = np.array([[3.0, 0.0, 0.3], [4.0, 0.0, 0.4]])
    M = column_shrink(Q, 1.0)
    npt.assert_allclose(M[:, 0], [3 * 4 / 5, 4 * 4 / 5])
    npt.assert_array_equal(M[:, 1], 0.0)
    npt.assert_array_equal(M[:, 2], 0.0)


@given(arrays(np.float64, (5, 4), elements=finite), st.floats(0, 30))
def test_column_shrink_reduces_norms_exactly(Q, t):
    M = column_shrink(Q, t)
    nq = np.linalg.norm(Q, axis=0)
    npt.assert_allclose(np.linalg.norm(M, axis=0), np.maximum(nq - t, 0), atol=1e-10)
    # direction preserved
    assert np.all(np.sum(M * Q, axis=0) >= -1e-12)


def test_column_shrink_limits():
    Q = np.random.default_rng(0).standard_normal((4, 4))
    npt.assert_array_equal(column_shrink(Q, 0.0), Q)
    npt.assert_array_equal(column_shrink(Q, 1e12), 0.0)
    with pytest.raises(ValueError):
        column_shrink(Q, -1.0)


def test_soft_threshold():
    npt.assert_allclose(soft_threshold(np.array([-3.0, -0.5, 0.0, 0.5, 2.0]), 1.0),
                        [-2.0, 0.0, 0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        soft_threshold(np.ones(2), -0.1)


@given(arrays(np.float64, (2, 3, 4), elements=finite))
def test_rotate180_is_an_involution(k):
    npt.assert_array_equal(rotate180(rotate180(k)), k)
    assert rotate180(k)[0, 0, 0] == k[-1, -1, -1]


def test_rotate180_needs_three_axes():
    with pytest.raises(ValueError):
        rotate180(np.ones((2, 2)))


@given(arrays(np.float64, (6, 3), elements=finite))
def test_norms_match_fsum(A):
    got = norms(A)
    assert math.isclose(got["frobenius"], math.sqrt(math.fsum((A * A).ravel())),
                        rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(got["l1"], math.fsum(np.abs(A).ravel()), rel_tol=1e-12, abs_tol=1e-300)
    cols = [math.sqrt(math.fsum(c * c)) for c in A.T]
    assert math.isclose(got["l21"], math.fsum(cols), rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(frob2(A), got["frobenius"] ** 2, rel_tol=1e-12, abs_tol=1e-300)


def test_norms_are_bit_reproducible():
    A = np.random.default_rng(1).standard_normal((300, 7))
    assert norms(A) == norms(A.copy())
    assert norms(np.zeros((0, 3)))["l21"] == 0.0


def test_dtype_helpers():
    assert resolve_dtype(True) is np.float64
    assert resolve_dtype(False) is np.float32
    assert as_dtype("float32") is np.float32
    with pytest.raises(ConfigError):
        as_dtype("int8")
