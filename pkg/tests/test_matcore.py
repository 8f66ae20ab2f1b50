import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from volfunctionals.errors import DimensionError, NumericalError
from volfunctionals.matcore import (
    is_psd,
    is_tensor4_symmetric,
    outer_product_increment,
    psd_tolerance,
    symmetrize,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_symmetrize_examples():
    np.testing.assert_array_equal(symmetrize([[1, 2], [2, 1]]), [[1, 2], [2, 1]])
    np.testing.assert_array_equal(symmetrize([[0, 1], [0, 0]]), [[0, 0.5], [0.5, 0]])
    np.testing.assert_array_equal(symmetrize([[3]]), [[3]])


def test_symmetrize_rejects_bad_input():
    with pytest.raises(DimensionError):
        symmetrize(np.zeros((2, 3)))
    with pytest.raises(NumericalError):
        symmetrize([[1.0, np.nan], [0.0, 1.0]])


def test_outer_product_examples():
    np.testing.assert_array_equal(outer_product_increment([1, 0]), [[1, 0], [0, 0]])
    np.testing.assert_array_equal(outer_product_increment([1, 1]), [[1, 1], [1, 1]])
    np.testing.assert_array_equal(outer_product_increment([2]), [[4]])


def test_is_psd_examples():
    assert is_psd(np.eye(2), 0.0)
    assert not is_psd(np.array([[0.0, 1.0], [1.0, 0.0]]), 1e-12)
    assert is_psd(outer_product_increment([2.0]), 0.0)


@given(arrays(float, st.integers(1, 5), elements=finite))
def test_outer_product_is_psd_and_symmetric(x):
    m = outer_product_increment(x)
    assert np.array_equal(m, m.T)
    # rounding of eigvalsh on a rank-one matrix is bounded by d * eps * ||m||
    assert is_psd(m, psd_tolerance(m))


@given(arrays(float, (3, 3), elements=finite))
def test_symmetrize_idempotent(m):
    s = symmetrize(m)
    np.testing.assert_array_equal(symmetrize(s), s)


@settings(max_examples=50)
@given(arrays(float, (6, 3), elements=st.floats(-10, 10)), arrays(float, 6, elements=st.floats(0, 5)))
def test_nonnegative_combination_of_psd_terms(xs, w):
    total = sum(wi * outer_product_increment(x) for wi, x in zip(w, xs))
    assert is_psd(total, psd_tolerance(total))


def test_stack_evaluation():
    stack = np.stack([np.eye(2), -np.eye(2)])
    np.testing.assert_array_equal(is_psd(stack, 0.0), [True, False])


def test_tensor4_symmetry_detects_asymmetry():
    t = np.zeros((2, 2, 2, 2))
    t[0, 1, 0, 0] = 1.0
    assert not is_tensor4_symmetric(t)
