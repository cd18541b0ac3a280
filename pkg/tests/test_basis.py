import numpy as np
import pytest

from sfcast.basis import _knot_vector, bspline_basis
from sfcast.errors import InvalidBasisError


def cox_de_boor(x, k, i, t):
    """Independent recursive evaluation of basis function i at x."""
    if k == 0:
        # right-closed at the final knot so the last basis reaches x = t[-1]
        if t[i] <= x < t[i + 1]:
            return 1.0
        if x == t[-1] and t[i] < t[i + 1] == t[-1]:
            return 1.0
        return 0.0
    c1 = c2 = 0.0
    if t[i + k] != t[i]:
        c1 = (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(x, k - 1, i, t)
    if t[i + k + 1] != t[i + 1]:
        c2 = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(x, k - 1, i + 1, t)
    return c1 + c2


def oracle_matrix(T, K):
    t = _knot_vector(T, K)
    n_basis = len(t) - 4
    B = np.zeros((T, n_basis))
    for j, x in enumerate(range(1, T + 1)):
        for h in range(n_basis):
            B[j, h] = cox_de_boor(float(x), 3, h, t)
    return B


def test_column_count():
    assert bspline_basis(30, 4).B.shape == (30, 7)
    for K in range(1, 12):
        assert bspline_basis(40, K).n_basis == K + 3


def test_partition_of_unity_and_nonnegativity():
    for T, K in [(20, 5), (52, 8), (365, 20), (10, 1)]:
        B = bspline_basis(T, K).B
        assert np.all(B >= 0)
        np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-9)


def test_matches_cox_de_boor_oracle():
    for T, K in [(20, 5), (15, 3), (52, 8)]:
        B = bspline_basis(T, K).B
        np.testing.assert_allclose(B, oracle_matrix(T, K), atol=1e-10)


def test_local_support_contiguous():
    bm = bspline_basis(40, 6)
    for h in range(bm.n_basis):
        nz = np.nonzero(bm.B[:, h] > 0)[0]
        assert nz.size > 0
        assert np.all(np.diff(nz) == 1)


def test_entries_in_unit_interval():
    B = bspline_basis(60, 10).B
    assert B.min() >= 0.0 and B.max() <= 1.0


def test_invalid_args():
    with pytest.raises(InvalidBasisError):
        bspline_basis(3, 1)
    with pytest.raises(InvalidBasisError):
        bspline_basis(10, 11)
    with pytest.raises(InvalidBasisError):
        bspline_basis(10, 0)
