import numpy as np
import pytest
import scipy.linalg
from scipy.stats import poisson
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from poisson_bound.core.errors import NotNonnegative, NotConverged, PositiveDiagonal
from poisson_bound.numerics.dense_kernel import (
    matrix_exponential, perron_eigenpair, uniformization_terms,
)


def _subgenerator(rates: np.ndarray, leak: np.ndarray) -> np.ndarray:
    """Off-diagonal rates with rows summing to -leak."""
    A = rates.copy()
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -(A.sum(axis=1) + leak))
    return A


@settings(max_examples=40, deadline=None)
@given(
    rates=arrays(np.float64, (3, 3), elements=st.floats(0.0, 5.0)),
    leak=arrays(np.float64, 3, elements=st.floats(0.0, 2.0)),
    t=st.floats(0.0, 3.0),
)
def test_matches_scipy_expm(rates, leak, t):
    A = _subgenerator(rates, leak)
    np.testing.assert_allclose(matrix_exponential(A, t), scipy.linalg.expm(A * t), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(
    rates=arrays(np.float64, (3, 3), elements=st.floats(0.0, 5.0)),
    leak=arrays(np.float64, 3, elements=st.floats(0.0, 2.0)),
    s=st.floats(0.0, 2.0),
    t=st.floats(0.0, 2.0),
)
def test_semigroup_property(rates, leak, s, t):
    A = _subgenerator(rates, leak)
    np.testing.assert_allclose(matrix_exponential(A, s) @ matrix_exponential(A, t),
                               matrix_exponential(A, s + t), atol=1e-9)


def test_zero_time_is_identity():
    A = np.array([[-2.0, 1.0], [0.5, -1.5]])
    np.testing.assert_array_equal(matrix_exponential(A, 0.0), np.eye(2))


def test_generator_rows_stay_stochastic():
    Q = np.array([[-2.0, 1.0, 1.0], [0.5, -1.5, 1.0], [0.0, 3.0, -3.0]])
    P = matrix_exponential(Q, 2.5)
    np.testing.assert_allclose(P.sum(axis=1), np.ones(3), atol=1e-11)
    assert np.all(P >= 0)


@pytest.mark.parametrize("A, error", [
    (np.array([[-1.0, -0.5], [0.0, -1.0]]), NotNonnegative),
    (np.array([[0.5, 0.0], [1.0, -1.0]]), PositiveDiagonal),
])
def test_expm_rejects_non_subgenerators(A, error):
    with pytest.raises(error):
        matrix_exponential(A, 1.0)


def test_uniformization_terms_respect_tail():
    assert uniformization_terms(0.0, 1e-12, 100) == 0
    n = uniformization_terms(10.0, 1e-12, 10_000)
    assert poisson.sf(n, 10.0) <= 1e-12
    assert poisson.sf(n - 1, 10.0) > 1e-12
    with pytest.raises(NotConverged):
        uniformization_terms(1e4, 1e-12, 100)


def test_perron_pair_of_known_matrix():
    B = np.array([[2.0, 1.0], [1.0, 2.0]])
    pair = perron_eigenpair(B)
    assert pair.eigenvalue == pytest.approx(3.0, abs=1e-9)
    np.testing.assert_allclose(pair.eigenvector, [1.0, 1.0], atol=1e-9)
    assert pair.residual <= 1e-10


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(0.1, 10.0)))
def test_perron_residual_on_positive_matrices(B):
    pair = perron_eigenpair(B)
    u = pair.eigenvector
    assert u.max() == 1.0
    assert np.all(u > 0)
    np.testing.assert_allclose(B @ u, pair.eigenvalue * u, atol=1e-8 * pair.eigenvalue)
    assert pair.eigenvalue == pytest.approx(max(abs(np.linalg.eigvals(B))), rel=1e-8)


def test_perron_rejects_negative_entries():
    with pytest.raises(NotNonnegative):
        perron_eigenpair(np.array([[1.0, -1.0], [1.0, 1.0]]))
