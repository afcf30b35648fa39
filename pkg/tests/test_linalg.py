import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from betaframe import linalg
from betaframe.errors import RankDeficient, TooLarge


def test_least_squares_examples():
    np.testing.assert_allclose(linalg.least_squares_apply([[1.0], [2.0]], [[1.0], [0.0]]), [[0.2]], rtol=1e-14)
    np.testing.assert_allclose(linalg.least_squares_apply(np.eye(2), np.eye(2)), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(linalg.least_squares_apply([[1.0], [1.0]], np.eye(2)), [[0.5, 0.5]], atol=1e-15)


def test_least_squares_vector_rhs():
    x = linalg.least_squares_apply([[1.0], [2.0]], [1.0, 0.0])
    assert x.shape == (1,)
    assert x[0] == pytest.approx(0.2)


def test_least_squares_rank_deficient():
    with pytest.raises(RankDeficient):
        linalg.least_squares_apply([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]], np.eye(3))
    with pytest.raises(RankDeficient):
        linalg.least_squares_apply([[1.0, 2.0]], [[1.0]])


def test_least_squares_random(rng):
    for _ in range(20):
        p, k = rng.integers(3, 9), rng.integers(1, 4)
        A = rng.standard_normal((p, k))
        np.testing.assert_allclose(linalg.least_squares_apply(A, A), np.eye(k), atol=1e-9)
        X = linalg.least_squares_apply(A, np.eye(p))
        P = A @ X
        # A X is the orthogonal projector onto col(A)
        np.testing.assert_allclose(P, P.T, atol=1e-9)
        np.testing.assert_allclose(P @ P, P, atol=1e-9)
        np.testing.assert_allclose(P @ A, A, atol=1e-9)


def test_sigma_examples():
    assert linalg.sigma_min([[1.0], [2.0]]) == pytest.approx(math.sqrt(5), rel=1e-14)
    assert linalg.sigma_min(np.eye(3)) == pytest.approx(1.0)
    assert linalg.sigma_min([[2.0]]) == 2.0
    assert linalg.sigma_max(np.eye(3)) == pytest.approx(1.0)
    assert linalg.sigma_max([[1.0], [2.0]]) == pytest.approx(math.sqrt(5), rel=1e-14)
    # A^T A = [[2,-1],[-1,1]] has eigenvalues (3 +- sqrt 5)/2
    assert linalg.sigma_max([[1.0, 0.0], [-1.0, 1.0]]) == pytest.approx(math.sqrt((3 + math.sqrt(5)) / 2), rel=1e-14)


def test_sigma_against_eigensolve(rng):
    for _ in range(50):
        r, c = rng.integers(1, 6, size=2)
        A = rng.standard_normal((r, c))
        ev = np.linalg.eigvalsh(A.T @ A if r >= c else A @ A.T)
        ev = np.sqrt(np.clip(ev, 0, None))
        assert linalg.sigma_min(A) <= linalg.sigma_max(A)
        assert abs(linalg.sigma_max(A) - ev[-1]) <= 1e-8
        assert abs(linalg.sigma_min(A) - ev[0]) <= 1e-8


def test_row_norms():
    assert linalg.norm_inf_inf([[1.0, 0.0], [-1.0, 1.0]]) == 2.0
    assert linalg.norm_inf_inf([[0.0, 0.0, 1 / 8]]) == 0.125
    assert linalg.norm_inf_inf(np.eye(4)) == 1.0
    assert linalg.norm_2_inf([[3.0, 4.0], [1.0, 0.0]]) == 5.0
    assert linalg.norm_2_inf([[3.0, 4.0], [1.0, 0.0], [0.0, 0.0]]) == 5.0


def _inf_2_by_enumeration(A):
    m = A.shape[1]
    return max(np.linalg.norm(A @ np.array(s)) for s in itertools.product((-1.0, 1.0), repeat=m))


def test_norm_inf_2_examples():
    assert linalg.norm_inf_2_exact([[1.0, 1.0]])[0] == pytest.approx(2.0)
    assert linalg.norm_inf_2_exact([[1.0, -1.0]])[0] == pytest.approx(2.0)
    exact, bound = linalg.norm_inf_2_exact(np.eye(2))
    assert exact == pytest.approx(math.sqrt(2))
    assert bound == pytest.approx(math.sqrt(2))


def test_norm_inf_2_matches_enumeration(rng):
    for _ in range(30):
        k, m = rng.integers(1, 4), rng.integers(1, 9)
        A = rng.standard_normal((k, m))
        exact, bound = linalg.norm_inf_2_exact(A, chunk=7)
        assert exact == pytest.approx(_inf_2_by_enumeration(A), rel=1e-12)
        assert exact <= bound * (1 + 1e-12)


def test_norm_inf_2_bound_equality_cases():
    # one row: both sides equal the l1 norm of the row
    a = np.array([[0.3, -2.0, 1.5]])
    exact, bound = linalg.norm_inf_2_exact(a)
    assert exact == pytest.approx(bound, rel=1e-14)
    # single nonzero column of equal-magnitude entries
    b = np.zeros((3, 4))
    b[:, 2] = [2.0, -2.0, 2.0]
    exact, bound = linalg.norm_inf_2_exact(b)
    assert exact == pytest.approx(bound, rel=1e-14)


def test_norm_inf_2_too_large():
    with pytest.raises(TooLarge):
        linalg.norm_inf_2_exact(np.ones((1, 25)))


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=finite), st.floats(-5, 5))
def test_norms_absolutely_homogeneous(A, c):
    for norm in (linalg.norm_inf_inf, linalg.norm_2_inf, linalg.sigma_max, linalg.sigma_min,
                 lambda M: linalg.norm_inf_2_exact(M)[0]):
        assert norm(c * A) == pytest.approx(abs(c) * norm(A), rel=1e-9, abs=1e-9)
