import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphsplit.errors import InvalidInputError
from graphsplit.operators import (
    BallNormalCone,
    LinearMonotone,
    ProblemInstance,
    ProductResolvent,
    QuadraticGradient,
    Saddle,
    SimplexNormalCone,
    ZeroForward,
    ZeroResolvent,
    problem_from_dict,
    project_ball,
    project_simplex,
    resolve,
)

vec = arrays(float, 4, elements=st.floats(-50, 50, allow_nan=False))


def test_ball_examples():
    np.testing.assert_allclose(project_ball([1.0, 2.0], [1.0, 2.0], 1.0), [1.0, 2.0])
    np.testing.assert_allclose(project_ball([2.0, 0.0], [0.0, 0.0], 1.0), [1.0, 0.0])
    np.testing.assert_allclose(project_ball([4.0, 5.0], [1.0, 1.0], 2.0), [2.2, 2.6])


def test_simplex_examples():
    np.testing.assert_allclose(project_simplex([0.5, 0.5]), [0.5, 0.5])
    np.testing.assert_allclose(project_simplex([2.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(project_simplex([1.0, 1.0, 1.0]), [1 / 3] * 3)


@given(vec, vec)
def test_ball_projection_is_firmly_nonexpansive(a, b):
    c, r = np.ones(4), 2.0
    pa, pb = project_ball(a, c, r), project_ball(b, c, r)
    assert np.linalg.norm(pa - c) <= r + 1e-9
    assert (pa - pb) @ (a - b) >= np.sum((pa - pb) ** 2) - 1e-7
    np.testing.assert_allclose(project_ball(pa, c, r), pa, atol=1e-12)


@given(vec, vec)
def test_simplex_projection_properties(a, b):
    pa, pb = project_simplex(a), project_simplex(b)
    assert pa.min() >= 0 and pa.sum() == pytest.approx(1.0)
    assert (pa - pb) @ (a - b) >= np.sum((pa - pb) ** 2) - 1e-7
    # variational inequality: <a - pa, s - pa> <= 0 for every vertex s
    for k in range(4):
        s = np.eye(4)[k]
        assert (a - pa) @ (s - pa) <= 1e-7 * (1 + np.abs(a).max())


def test_simplex_projection_batched(rng):
    Y = rng.normal(size=(5, 3, 4))
    out = project_simplex(Y)
    for idx in np.ndindex(5, 3):
        np.testing.assert_allclose(out[idx], project_simplex(Y[idx]))


def test_forward_examples():
    np.testing.assert_allclose(Saddle([[1.0]]).apply(np.array([3.0, 2.0])), [2.0, -3.0])
    np.testing.assert_allclose(QuadraticGradient(np.diag([2.0, 3.0])).apply(np.ones(2)), [2.0, 3.0])
    np.testing.assert_array_equal(ZeroForward(3).apply(np.arange(3.0)), np.zeros(3))


@given(arrays(float, 6, elements=st.floats(-10, 10, allow_nan=False)))
def test_saddle_is_skew(x):
    T = np.arange(9.0).reshape(3, 3) / 7 + np.eye(3)
    assert abs(Saddle(T).apply(x) @ x) <= 1e-12 * max(1.0, x @ x) * 10


def test_resolvent_examples():
    np.testing.assert_array_equal(resolve(ZeroResolvent(2), 3.0, np.array([1.0, 2.0])), [1.0, 2.0])
    np.testing.assert_allclose(resolve(BallNormalCone([0.0, 0.0], 1.0), 7.0, np.array([0.0, 3.0])), [0.0, 1.0])
    np.testing.assert_allclose(resolve(LinearMonotone([[1.0]]), 1.0, np.array([4.0])), [2.0])
    with pytest.raises(InvalidInputError):
        resolve(ZeroResolvent(1), 0.0, np.zeros(1))


def test_linear_resolvent_batched_sigma(rng):
    L = rng.normal(size=(3, 3))
    L = L - L.T + np.eye(3)
    op = LinearMonotone(L)
    y = rng.normal(size=(4, 3))
    sig = np.array([0.1, 0.5, 1.0, 2.0])
    out = op.resolve(sig, y)
    for k in range(4):
        np.testing.assert_allclose((np.eye(3) + sig[k] * L) @ out[k], y[k])


def test_product_resolvent_splits_blocks():
    op = ProductResolvent((SimplexNormalCone(2), SimplexNormalCone(2)))
    np.testing.assert_allclose(op.resolve(1.0, np.array([2.0, 0.0, 1.0, 1.0])), [1, 0, 0.5, 0.5])


def test_problem_dimension_checks():
    with pytest.raises(InvalidInputError):
        ProblemInstance([ZeroResolvent(2)], [ZeroForward(3)])
    with pytest.raises(InvalidInputError):
        BallNormalCone([0.0], -1.0)


def test_problem_roundtrip():
    prob = ProblemInstance(
        [BallNormalCone([0.0, 1.0], 2.0), ProductResolvent((SimplexNormalCone(1), SimplexNormalCone(1)))],
        [QuadraticGradient(np.eye(2)), Saddle([[2.0]])],
    )
    again = problem_from_dict(prob.to_dict())
    assert again.n == 2 and again.p == 2 and again.ell == pytest.approx(2.0)
    assert not again.cocoercive
