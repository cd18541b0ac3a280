"""Pure-numpy implementation of the hot residual kernel."""

import numpy as np


def masked_residual(Y, mask, F, L, R, b):
    """Residual (F + L R + b) - Y over observed cells, zero elsewhere.

    Returns (E, sse) where E is dense T x c and sse = sum of squared
    residuals over the observed cells.
    """
    P = F + b[:, None]
    if L is not None and L.shape[1] > 0:
        P = P + L @ R
    E = np.where(mask, P - Y, 0.0)
    return E, float(np.einsum("ji,ji->", E, E))
