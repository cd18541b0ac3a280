"""Reference predictors: past-year average, metadata k-NN, MF alone."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError
from .metadata import MetadataMatrix
from .model import ModelSpec
from .profile_matrix import ProfileMatrix

EPS = 1e-9


def avg_py(pm: ProfileMatrix, series_id: str) -> np.ndarray:
    """Per time index, the mean over the series' observed training years.

    Time indices with no observation at all come back as 0 (flagged by the
    companion coverage vector from avg_py_with_coverage).
    """
    profile, _ = avg_py_with_coverage(pm, series_id)
    return profile


def avg_py_with_coverage(pm: ProfileMatrix, series_id: str):
    cols = pm.index.columns_of(series_id)
    vals = pm.data[:, cols]
    obs = pm.mask[:, cols]
    counts = obs.sum(axis=1)
    covered = counts > 0
    profile = np.zeros(pm.period)
    sums = np.where(obs, vals, 0.0).sum(axis=1)
    profile[covered] = sums[covered] / counts[covered]
    return profile, covered


def knn_forecast(
    phi_star,
    train_meta: MetadataMatrix,
    train_profiles: ProfileMatrix,
    k: int = 10,
    weighting: str = "inverse_distance",
) -> np.ndarray:
    """Weighted average of the k nearest training series' past-year profiles.

    Distances are Euclidean over the per-series metadata vectors; weights are
    1/(d + 1e-9), or uniform when ``weighting="uniform"``.
    """
    series_ids = list(dict.fromkeys(train_meta.ids))
    if k > len(series_ids):
        raise ShapeError(f"k={k} exceeds {len(series_ids)} training series")
    # one metadata column per series (year copies are identical)
    first_col = {}
    for c, sid in enumerate(train_meta.ids):
        first_col.setdefault(sid, c)
    cols = [first_col[sid] for sid in series_ids]
    Phi = train_meta.matrix[:, cols]

    q = phi_star.toarray().ravel() if sp.issparse(phi_star) else np.asarray(phi_star).ravel()
    diffs = Phi.toarray() - q[:, None]
    dists = np.sqrt((diffs * diffs).sum(axis=0))

    order = np.argsort(dists, kind="stable")[:k]
    if weighting == "uniform":
        weights = np.ones(k)
    else:
        weights = 1.0 / (dists[order] + EPS)
    out = np.zeros(train_profiles.period)
    for w, idx in zip(weights, order):
        out += w * avg_py(train_profiles, series_ids[idx])
    return out / weights.sum()


def mf_alone_spec(mf_rank: int = 5) -> ModelSpec:
    """Matrix factorization with no regression component.

    Cold-start with this spec degenerates to the bias vector and is flagged
    inapplicable by the scenario harness.
    """
    return ModelSpec(regression_variant="none", mf_enabled=True, mf_rank=mf_rank)
