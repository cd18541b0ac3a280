"""Forecast paths: cold-start, warm-start (via latent estimation), imputation."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UnderdeterminedError
from .metadata import MetadataMatrix
from .model import ModelParams, ModelSpec, eval_column, eval_regression
from .profile_matrix import ProfileMatrix


@dataclass(frozen=True)
class WarmObservations:
    """A new series: its metadata plus a handful of observed samples."""

    phi: object  # sparse or dense metadata column
    observed: tuple  # of (time index j, value)

    def __post_init__(self):
        idx = [j for j, _ in self.observed]
        if len(set(idx)) != len(idx):
            raise ShapeError("observed time indices must be distinct")
        if not all(np.isfinite(v) for _, v in self.observed):
            raise ShapeError("observed values must be finite")


def forecast_cold(params: ModelParams, phi) -> np.ndarray:
    """f(phi) + b; the latent factor of an unseen series is zero."""
    return eval_regression(params, phi) + params.arrays["b"]


def estimate_latent(params: ModelParams, warm: WarmObservations, lambda2: float) -> np.ndarray:
    """Ridge estimate of the latent factor from the warm observations.

    Solves argmin_r sum_(j,v) (v - f(phi)_j - L_j'r - b_j)^2 + lambda2 ||r||^2
    through the k' x k' normal equations, with f, L, b held frozen.
    """
    if not params.spec.mf_enabled:
        raise ShapeError("latent estimation requires the MF component")
    if not warm.observed:
        raise ShapeError("need at least one observation")
    rows = np.array([j for j, _ in warm.observed], dtype=np.intp)
    vals = np.array([v for _, v in warm.observed])
    base = forecast_cold(params, warm.phi)
    resid = vals - base[rows]
    A = params.arrays["L"][rows]  # p x k'
    k = A.shape[1]
    gram = A.T @ A + lambda2 * np.eye(k)
    if lambda2 == 0.0 and np.linalg.cond(gram) > 1e12:
        raise UnderdeterminedError("singular normal equations; pass lambda2 > 0")
    return np.linalg.solve(gram, A.T @ resid)


def forecast_warm(params: ModelParams, warm: WarmObservations, lambda2: float) -> np.ndarray:
    """f(phi) + L r + b with r estimated from the warm observations."""
    if not warm.observed:
        warnings.warn("no warm observations; falling back to the cold forecast")
        return forecast_cold(params, warm.phi)
    r = estimate_latent(params, warm, lambda2)
    return forecast_cold(params, warm.phi) + params.arrays["L"] @ r


def forecast_warm_refit(
    spec: ModelSpec,
    pm: ProfileMatrix,
    meta: MetadataMatrix,
    warm: WarmObservations,
    cfg,
) -> np.ndarray:
    """Warm forecast by joint refit: the warm column joins the training matrix.

    Slower than the closed-form path but treats the warm points exactly as
    extra training observations.
    """
    import scipy.sparse as sp

    from .profile_matrix import SeriesYearIndex
    from .trainer import fit

    T, N = pm.shape
    col = np.zeros((T, 1))
    colmask = np.zeros((T, 1), dtype=bool)
    for j, v in warm.observed:
        col[j, 0] = v
        colmask[j, 0] = True
    data = np.concatenate([pm.data, col], axis=1)
    mask = np.concatenate([pm.mask, colmask], axis=1)
    entries = list(pm.index.entries) + [("__warm__", 1, N)]
    aug_pm = ProfileMatrix(data, mask, pm.period, SeriesYearIndex(tuple(entries)), dict(pm.offsets))

    phi = warm.phi if sp.issparse(warm.phi) else np.asarray(warm.phi).reshape(-1, 1)
    phi = sp.csc_matrix(phi)
    aug_matrix = sp.hstack([meta.matrix, phi], format="csc")
    aug_meta = MetadataMatrix(aug_matrix, meta.vocab, tuple(meta.ids) + ("__warm__",))

    params, _ = fit(spec, aug_pm, aug_meta, cfg)
    r = params.arrays["R"][:, N] if spec.mf_enabled else None
    return eval_column(params, phi, r)


def impute(params: ModelParams, meta: MetadataMatrix, pm: ProfileMatrix) -> np.ndarray:
    """eval_column for every column of the matrix, as one T x N array.

    Callers read the result where the observation mask is False.
    """
    from .model import regression_batch

    if pm.shape[1] != params.dims[1]:
        raise ShapeError(
            f"matrix has {pm.shape[1]} columns, model covers {params.dims[1]}"
        )
    out = regression_batch(params, meta.matrix) + params.arrays["b"][:, None]
    if params.spec.mf_enabled:
        out = out + params.arrays["L"] @ params.arrays["R"]
    return out


def write_forecast(path, series_id: str, values: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("series_id,t,value\n")
        for t, v in enumerate(values):
            fh.write(f"{series_id},{t},{float(v)!r}\n")


def write_summary(path, mode: str, n_series: int, files: list) -> None:
    from .containers import atomic_write

    doc = {"mode": mode, "n_series": n_series, "files": list(files)}
    atomic_write(path, (json.dumps(doc, sort_keys=True) + "\n").encode())
