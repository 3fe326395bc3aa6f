import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphsplit.errors import InvalidInputError
from graphsplit.numlin import (
    is_psd,
    kernel_is_span_ones,
    lift_apply,
    load_matrix,
    matrix_from_dict,
    matrix_to_dict,
    pseudoinverse,
    save_matrix,
    spectral_norm,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False, allow_subnormal=False)


def test_pseudoinverse_examples():
    np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(pseudoinverse([[1.0], [-1.0]]), [[0.5, -0.5]])
    np.testing.assert_array_equal(pseudoinverse(np.zeros((2, 3))), np.zeros((3, 2)))


@given(arrays(float, (4, 3), elements=finite))
def test_pseudoinverse_penrose_identities(A):
    Ap = pseudoinverse(A)
    scale = max(1.0, np.abs(A).max()) ** 3
    np.testing.assert_allclose(A @ Ap @ A, A, atol=1e-7 * scale)
    np.testing.assert_allclose((A @ Ap).T, A @ Ap, atol=1e-7 * scale)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(4)) == pytest.approx(1.0)
    assert spectral_norm(np.diag([2.0, 3.0])) == pytest.approx(3.0)
    assert spectral_norm([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(1.0)


def test_is_psd_examples():
    assert is_psd(np.zeros((3, 3)))
    assert not is_psd(np.diag([1.0, -0.1]))
    lap = 3 * np.eye(3) - np.ones((3, 3))
    assert is_psd(lap)


def test_kernel_examples():
    assert kernel_is_span_ones([[1.0, -1.0]])
    two_edges = np.array([[1.0, -1.0, 0, 0], [0, 0, 1.0, -1.0]])
    assert not kernel_is_span_ones(two_edges)
    assert not kernel_is_span_ones(np.eye(2))


def test_lift_apply_examples():
    block = np.array([[3.0, 3.0], [1.0, 1.0]])
    np.testing.assert_array_equal(lift_apply(np.eye(2), block), block)
    np.testing.assert_array_equal(lift_apply([[1.0, -1.0]], block), [[2.0, 2.0]])
    np.testing.assert_array_equal(lift_apply(2 * np.eye(2), np.eye(2)), 2 * np.eye(2))


def test_lift_apply_carries_batch_axes(rng):
    A = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 5, 2))
    out = lift_apply(A, b)
    assert out.shape == (3, 5, 2)
    np.testing.assert_allclose(out[:, 2], A @ b[:, 2])


def test_lift_apply_rejects_mismatch():
    with pytest.raises(InvalidInputError):
        lift_apply(np.eye(2), np.ones((3, 2)))


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        spectral_norm([[np.nan]])


def test_matrix_json_roundtrip(tmp_path, rng):
    A = rng.normal(size=(3, 2))
    assert np.array_equal(matrix_from_dict(matrix_to_dict(A)), A)
    save_matrix(A, tmp_path / "a.json")
    assert np.array_equal(load_matrix(tmp_path / "a.json"), A)
    with pytest.raises(InvalidInputError):
        matrix_from_dict({"rows": 2, "cols": 2, "data": [1, 2, 3]})
