"""Hot-loop kernels: compiled extension when available, numpy otherwise.

Set SF_PURE_PYTHON=1 to force the numpy fallback.
"""

import os

import numpy as np

from . import _fallback

if os.environ.get("SF_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _speedups as _compiled
    except ImportError:
        _compiled = None

HAVE_COMPILED = _compiled is not None

_EMPTY = np.zeros((0, 0))


def masked_residual(Y, mask, F, L, R, b, force_fallback=False):
    """Residual of the model prediction over observed cells; zero elsewhere.

    Returns (E, sse): E is a dense T x c residual matrix, sse the sum of
    squared residuals over observed cells.  L/R may be None when the matrix
    factorization term is absent.
    """
    if _compiled is None or force_fallback:
        return _fallback.masked_residual(Y, mask, F, L, R, b)
    T, c = Y.shape
    if L is None:
        L = np.zeros((T, 0))
        R = np.zeros((0, c))
    E = np.zeros((T, c))
    sse = _compiled.masked_residual_impl(
        np.ascontiguousarray(Y),
        np.ascontiguousarray(mask).view(np.uint8),
        np.ascontiguousarray(F),
        np.ascontiguousarray(L),
        np.ascontiguousarray(R),
        np.ascontiguousarray(b),
        E,
    )
    return E, sse
