from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewdesign import ApproximateDesign, DesignRegion, ExactDesign, det, distance, inverse, logdet
from ewdesign.core import check_info_matrix, is_singular
from ewdesign.errors import DimensionMismatch, SingularMatrix


def cofactor_det(M):
    """Laplace expansion along the first row; an independent determinant oracle."""
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(M, 0, axis=0), j, axis=1)
        total += (-1) ** j * M[0, j] * cofactor_det(minor)
    return total


def spd(rng, p):
    A = rng.normal(size=(p, p + 2))
    return A @ A.T


def test_det_matches_cofactor_expansion():
    rng = np.random.default_rng(1)
    for p in range(1, 7):
        for _ in range(20):
            M = rng.normal(size=(p, p))
            assert det(M) == pytest.approx(cofactor_det(M), rel=1e-9, abs=1e-12)


def test_det_of_rank_deficient_matrix_is_zero():
    v = np.array([1.0, 2.0, 3.0])
    M = np.outer(v, v)
    assert det(M) == 0.0
    assert logdet(M) == -np.inf
    assert is_singular(M)
    with pytest.raises(SingularMatrix):
        inverse(M)


def test_det_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        det(np.zeros((2, 3)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 10), st.integers(0, 2**31 - 1))
def test_det_homogeneity(p, c, seed):
    M = spd(np.random.default_rng(seed), p)
    assert det(c * M) == pytest.approx(c ** p * det(M), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_inverse_involution(p, seed):
    M = spd(np.random.default_rng(seed), p)
    np.testing.assert_allclose(inverse(inverse(M)), M, rtol=1e-8, atol=1e-8 * np.abs(M).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_logdet_consistent_with_det(p, seed):
    M = spd(np.random.default_rng(seed), p)
    assert logdet(M) == pytest.approx(np.log(det(M)), rel=1e-10, abs=1e-10)


def test_check_info_matrix():
    M = spd(np.random.default_rng(0), 3)
    assert check_info_matrix(M) is not None
    with pytest.raises(ValueError):
        check_info_matrix(M + np.triu(np.ones((3, 3)), 1))
    with pytest.raises(ValueError):
        check_info_matrix(-M)


def test_region_validation_and_corners():
    with pytest.raises(ValueError):
        DesignRegion(((1.0, 1.0),))
    with pytest.raises(ValueError):
        DesignRegion(((2.0, 1.0),))
    with pytest.raises(DimensionMismatch):
        DesignRegion(((0.0, 1.0),), ((1.0,), (1.0, 2.0)))
    reg = DesignRegion.full_factorial(((0, 1), (-1, 1)), ((-1, 1),))
    assert reg.k == 2 and reg.d == 3
    corners = reg.corners()
    assert corners.shape == (8, 3)
    expected = {(a, b, c) for c in (-1.0, 1.0) for a in (0.0, 1.0) for b in (-1.0, 1.0)}
    assert {tuple(r) for r in corners} == expected
    assert reg.contains([0.5, 0.0, 1.0])
    assert not reg.contains([0.5, 0.0, 0.0])
    assert not reg.contains([1.5, 0.0, 1.0])
    assert reg.combo_index([0.2, 0.3, 1.0]) == 1


def test_discrete_only_region():
    reg = DesignRegion.full_factorial((), ((0, 1), (0, 1)))
    assert reg.k == 0 and reg.d == 2
    assert reg.corners().shape == (4, 2)


def test_distance_modes():
    a, b = np.array([0.0, 0.0, 1.0]), np.array([0.3, 0.4, -1.0])
    assert distance(a, b, 2) == pytest.approx(np.sqrt(0.25 + 4.0))
    assert distance(a, b, 2, discrete_mismatch_inf=True) == np.inf
    c = np.array([0.3, 0.4, 1.0])
    assert distance(a, c, 2, discrete_mismatch_inf=True) == pytest.approx(0.5)


def test_approximate_design_validation():
    with pytest.raises(ValueError):
        ApproximateDesign(np.zeros((2, 1)), [0.5, 0.6])
    with pytest.raises(ValueError):
        ApproximateDesign(np.zeros((2, 1)), [1.5, -0.5])
    with pytest.raises(DimensionMismatch):
        ApproximateDesign(np.zeros((3, 1)), [0.5, 0.5])
    xi = ApproximateDesign.normalized([[0.0], [1.0], [2.0]], [1, 0, 3])
    np.testing.assert_allclose(xi.weights, [0.25, 0, 0.75])
    assert xi.drop_zero().m == 2


def test_exact_design():
    ex = ExactDesign([[0.0], [1.0]], [3, 7])
    assert ex.n == 10
    np.testing.assert_allclose(ex.to_approximate().weights, [0.3, 0.7])
    with pytest.raises(ValueError):
        ExactDesign([[0.0], [1.0]], [0, 7])
