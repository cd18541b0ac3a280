"""Cubic B-spline basis on the integer sample grid 1..T.

The domain [1, T] is divided into K evenly spaced spans by K-1 interior
knots; with a clamped (repeated-endpoint) cubic knot vector this yields
exactly K+3 basis functions that are nonnegative and sum to one at every
grid point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import InvalidBasisError

DEGREE = 3


@dataclass(frozen=True)
class BasisMatrix:
    B: np.ndarray  # T x (K+3)
    knots: np.ndarray  # interior knot positions
    degree: int = DEGREE

    @property
    def n_basis(self) -> int:
        return self.B.shape[1]


def _knot_vector(T: int, K: int) -> np.ndarray:
    interior = np.linspace(1.0, float(T), K + 1)[1:-1]
    return np.concatenate(
        [np.full(DEGREE + 1, 1.0), interior, np.full(DEGREE + 1, float(T))]
    )


def bspline_basis(T: int, K: int) -> BasisMatrix:
    """Evaluate the clamped cubic basis at j = 1..T; columns number K+3."""
    if T < 4:
        raise InvalidBasisError(f"need T >= 4, got {T}")
    if not 1 <= K <= T:
        raise InvalidBasisError(f"need 1 <= K <= T, got K={K}")
    t = _knot_vector(T, K)
    x = np.arange(1, T + 1, dtype=np.float64)
    B = BSpline.design_matrix(x, t, DEGREE).toarray()
    assert B.shape == (T, K + 3)
    return BasisMatrix(B, t[DEGREE + 1 : -(DEGREE + 1)])


def dump_basis(path, bm: BasisMatrix) -> None:
    np.savetxt(path, bm.B, delimiter=",")
