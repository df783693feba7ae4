import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aemor.errors import ContractError, SingularMatrixError
from aemor.linalg import make_rng, matmul, solve_linear, svd_thin, variance


def random_matrix(seed, rows, cols):
    return make_rng(seed).standard_normal((rows, cols))


@pytest.mark.parametrize("shape", [(10, 6), (6, 10), (1, 5), (5, 1), (7, 7)])
def test_svd_matches_library_oracle(shape):
    a = random_matrix(3, *shape)
    u, s, vt = svd_thin(a)
    k = min(shape)
    assert u.shape == (shape[0], k) and s.shape == (k,) and vt.shape == (k, shape[1])
    np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, a, atol=1e-12)
    np.testing.assert_allclose(u.T @ u, np.eye(k), atol=1e-12)
    np.testing.assert_allclose(vt @ vt.T, np.eye(k), atol=1e-12)


def test_svd_rank_deficient_completes_u():
    a = np.outer(np.arange(1.0, 7.0), [1.0, -2.0, 0.5])
    u, s, vt = svd_thin(a)
    assert s[1] == 0.0 and s[2] == 0.0
    np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, a, atol=1e-12)


def test_svd_zero_matrix():
    u, s, vt = svd_thin(np.zeros((4, 3)))
    assert np.all(s == 0)
    np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-12)


def test_svd_rejects_bad_input():
    with pytest.raises(ContractError):
        svd_thin(np.zeros((0, 3)))
    with pytest.raises(ContractError):
        svd_thin(np.array([[np.nan, 1.0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_svd_properties(rows, cols, seed):
    a = random_matrix(seed, rows, cols)
    u, s, vt = svd_thin(a)
    assert np.all(np.diff(s) <= 1e-14)
    assert np.all(s >= 0)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, a, atol=1e-11)


def test_solve_linear_against_direct_oracle():
    k = random_matrix(1, 12, 12) + 12 * np.eye(12)
    r = random_matrix(2, 12, 1)[:, 0]
    x = solve_linear(k, r)
    np.testing.assert_allclose(k @ x, r, atol=1e-12)
    np.testing.assert_allclose(x, np.linalg.solve(k, r), rtol=1e-12)


def test_solve_linear_singular_reports_pivot():
    k = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as info:
        solve_linear(k, np.ones(2))
    assert info.value.pivot_index == 1


def test_solve_linear_shape_checks():
    with pytest.raises(ContractError):
        solve_linear(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ContractError):
        solve_linear(np.eye(2), np.ones(3))


def test_matmul_names_shapes():
    with pytest.raises(ContractError, match="2x3 by 2x2"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_variance_floor_and_value():
    assert variance([1.0, 1.0, 1.0]) == 1e-12
    assert variance([0.0, 2.0]) == pytest.approx(1.0)


def test_rng_streams_are_reproducible():
    assert np.array_equal(make_rng(42).standard_normal(5), make_rng(42).standard_normal(5))
    assert not np.array_equal(make_rng(42).standard_normal(5), make_rng(43).standard_normal(5))
