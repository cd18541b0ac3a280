import numpy as np
import pytest
import scipy.sparse as sp

from sfcast.metadata import MetadataMatrix
from sfcast.profile_matrix import ProfileMatrix, SeriesYearIndex


def single_year_index(N):
    return SeriesYearIndex(tuple((f"c{i}", 1, i) for i in range(N)))


def random_instance(T, N, m, seed, mask_density=0.8, phi_density=0.5):
    """Small random (ProfileMatrix, MetadataMatrix) pair for oracle tests."""
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(T, N))
    mask = rng.random((T, N)) < mask_density
    if not mask.any():
        mask[0, 0] = True
    data = np.where(mask, data, 0.0)
    pm = ProfileMatrix(data, mask, T, single_year_index(N))
    phi = np.where(rng.random((m, N)) < phi_density, rng.normal(size=(m, N)), 0.0)
    meta = MetadataMatrix(sp.csc_matrix(phi), tuple(f"t{i}" for i in range(m)),
                          tuple(f"c{i}" for i in range(N)))
    return pm, meta


def dense_phi(meta):
    return meta.matrix.toarray()


def oracle_regression(params, phi_col):
    """Plain-loop evaluation of f(phi) for one dense column."""
    T, _, m = params.dims
    variant = params.spec.regression_variant
    a = params.arrays
    out = np.zeros(T)
    if variant == "none":
        return out
    if variant == "full":
        for j in range(T):
            for k in range(m):
                out[j] += a["W"][j, k] * phi_col[k]
        return out
    if variant == "low_rank":
        kdim = a["H"].shape[1]
        for j in range(T):
            for q in range(kdim):
                inner = 0.0
                for k in range(m):
                    inner += a["U"][q, k] * phi_col[k]
                out[j] += a["H"][j, q] * inner
        return out
    if variant == "functional":
        B = params.basis.B
        nb = B.shape[1]
        for j in range(T):
            for h in range(nb):
                inner = 0.0
                for k in range(m):
                    inner += a["Q"][h, k] * phi_col[k]
                out[j] += B[j, h] * inner
        return out
    # neural
    h1 = np.maximum(a["W1"] @ phi_col + a["b1"], 0.0)
    h2 = np.maximum(a["W2"] @ h1 + a["b2"], 0.0)
    return a["W3"] @ h2 + a["b3"]


def oracle_loss(params, pm, meta, cfg):
    """Independent dense triple-loop objective evaluation."""
    T, N = pm.shape
    phi = dense_phi(meta)
    a = params.arrays
    total = 0.0
    for i in range(N):
        f = oracle_regression(params, phi[:, i])
        for j in range(T):
            if not pm.mask[j, i]:
                continue
            pred = f[j] + a["b"][j]
            if params.spec.mf_enabled:
                for q in range(a["L"].shape[1]):
                    pred += a["L"][j, q] * a["R"][q, i]
            total += (pm.data[j, i] - pred) ** 2
    total /= 2 * N
    from sfcast.model import REGULARIZED

    for name in REGULARIZED[params.spec.regression_variant]:
        total += cfg.lambda1 / (2 * N) * float((a[name] ** 2).sum())
    if params.spec.mf_enabled:
        total += cfg.lambda2 / (2 * N) * float((a["L"] ** 2).sum() + (a["R"] ** 2).sum())
    return total


ALL_SPECS = [
    ("full", False), ("full", True),
    ("low_rank", False), ("low_rank", True),
    ("functional", False), ("functional", True),
    ("neural", False), ("neural", True),
    ("none", True),
]


def make_spec(variant, mf, k=2, kprime=2, knots=4, hidden=9):
    from sfcast.model import ModelSpec

    return ModelSpec(
        regression_variant=variant,
        regression_rank=k,
        knots=knots,
        hidden=hidden,
        mf_enabled=mf,
        mf_rank=kprime,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
