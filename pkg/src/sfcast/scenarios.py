"""Experiment setups and synthetic data with planted ground truth."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptyInputError, ShapeError
from .metadata import MetadataMatrix, replicate_for_years
from .model import ModelParams, ModelSpec
from .profile_matrix import ProfileMatrix, RawSeries, reorganize


def mask_uniform(pm: ProfileMatrix, fraction: float, seed: int) -> ProfileMatrix:
    """Hide exactly round(fraction * |observed|) entries uniformly at random."""
    if not 0 <= fraction < 1:
        raise ShapeError(f"fraction must be in [0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    obs = np.argwhere(pm.mask)
    n_hide = round(fraction * len(obs))
    pick = rng.choice(len(obs), size=n_hide, replace=False)
    mask = pm.mask.copy()
    mask[obs[pick, 0], obs[pick, 1]] = False
    return pm.with_mask(mask)


def split_long_range(pm: ProfileMatrix):
    """Hide each series' final year column; evaluate on its observed cells."""
    mask = pm.mask.copy()
    eval_mask = np.zeros_like(pm.mask)
    for sid in pm.index.series_ids:
        cols = pm.index.columns_of(sid)
        if len(cols) < 2:
            warnings.warn(f"series {sid!r} has a single year; excluded from the test")
            continue
        last = cols[-1]
        eval_mask[:, last] = pm.mask[:, last]
        mask[:, last] = False
    return pm.with_mask(mask), eval_mask


def split_cold_start(collection: list, holdout_fraction: float, seed: int):
    """Hold out whole series; their metadata is used only at forecast time."""
    if not 0 < holdout_fraction < 1:
        raise ShapeError("holdout_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(collection)
    n_test = max(1, round(holdout_fraction * n))
    test_idx = set(rng.choice(n, size=n_test, replace=False).tolist())
    train = [s for i, s in enumerate(collection) if i not in test_idx]
    test = [s for i, s in enumerate(collection) if i in test_idx]
    if not train:
        raise ShapeError("holdout leaves no training series")
    return train, test


@dataclass(frozen=True)
class WarmItem:
    series: RawSeries
    prefix: int  # samples of the test year visible at forecast time


def split_warm_start(
    collection: list, prefix: int, period: int, holdout_fraction: float = 0.25, seed: int = 0
):
    """Cold-start split where each test series reveals its first samples."""
    if not 0 <= prefix < period:
        raise ShapeError(f"prefix must be in [0, {period}), got {prefix}")
    train, test = split_cold_start(collection, holdout_fraction, seed)
    return train, [WarmItem(s, prefix) for s in test]


def mask_contiguous(pm: ProfileMatrix, mean_len: float | None = None, seed: int = 0):
    """Hide one contiguous chunk per column, geometric length, uniform start.

    Default mean length is T/2 (configurable); chunks clip at the column end.
    Returns (train matrix, eval mask over the hidden observed cells).
    """
    T = pm.period
    if mean_len is None:
        mean_len = T / 2
    if mean_len <= 0:
        raise ShapeError("mean_len must be > 0")
    rng = np.random.default_rng(seed)
    mask = pm.mask.copy()
    eval_mask = np.zeros_like(pm.mask)
    starts = rng.integers(0, T, size=pm.shape[1])
    lengths = rng.geometric(min(1.0, 1.0 / mean_len), size=pm.shape[1])
    for i in range(pm.shape[1]):
        lo, hi = starts[i], min(T, starts[i] + lengths[i])
        chunk = np.zeros(T, dtype=bool)
        chunk[lo:hi] = True
        hidden = chunk & pm.mask[:, i]
        eval_mask[:, i] = hidden
        mask[hidden, i] = False
    return pm.with_mask(mask), eval_mask


@dataclass
class SyntheticDataset:
    series: list
    pm: ProfileMatrix
    meta: MetadataMatrix  # replicated across year columns
    per_series_meta: MetadataMatrix
    params: ModelParams  # the generator's parameters
    noise_std: float


def _sparse_nonneg_phi(rng, m, n, density):
    mask = rng.random((m, n)) < density
    vals = rng.exponential(1.0, size=(m, n))
    return sp.csc_matrix(np.where(mask, vals, 0.0))


def generate_synthetic(
    dims: tuple,
    noise_std: float,
    seed: int,
    years_per_series: int = 1,
    phi_density: float = 0.1,
    smooth: bool = False,
    mf_scale: float = 0.5,
) -> SyntheticDataset:
    """Sample the generative model with known parameters.

    dims = (T, N, m, k, k'); k' = 0 disables the factorization term.  With
    ``smooth`` the latent time courses are sinusoids instead of white noise.
    """
    T, N, m, k, kprime = dims
    if N % years_per_series:
        raise ShapeError("N must be divisible by years_per_series")
    n_series = N // years_per_series
    rng = np.random.default_rng(seed)

    Phi_series = _sparse_nonneg_phi(rng, m, n_series, phi_density)

    def latent_courses(width):
        if smooth:
            t = np.arange(T)
            return np.column_stack(
                [
                    np.sin(2 * np.pi * rng.uniform(0.5, 3.0) * t / T + rng.uniform(0, 2 * np.pi))
                    for _ in range(width)
                ]
            )
        return rng.normal(0.0, 1.0, size=(T, width))

    H = latent_courses(k)
    U = rng.normal(0.0, 1.0, size=(k, m))
    F_series = H @ (U @ Phi_series.toarray())
    scale = F_series.std()
    if scale > 0:
        H = H / scale  # puts the regression signal on unit scale
        F_series = F_series / scale
    b = rng.normal(0.0, 0.1, size=T)

    mf_enabled = kprime > 0
    spec = ModelSpec(
        regression_variant="low_rank",
        regression_rank=k,
        mf_enabled=mf_enabled,
        mf_rank=max(kprime, 1),
        noise_std=noise_std,
    )
    arrays = {"H": H, "U": U, "b": b}
    Y = np.repeat(F_series, years_per_series, axis=1) + b[:, None]
    if mf_enabled:
        L = latent_courses(kprime)
        R = rng.normal(0.0, 1.0, size=(kprime, N))
        lr = L @ R
        lr_std = lr.std()
        if lr_std > 0:
            L = L * (mf_scale / lr_std)
        arrays["L"] = L
        arrays["R"] = R
        Y = Y + L @ R
    if noise_std > 0:
        Y = Y + rng.normal(0.0, noise_std, size=Y.shape)

    series = []
    ids = [f"s{idx:04d}" for idx in range(n_series)]
    for idx, sid in enumerate(ids):
        cols = slice(idx * years_per_series, (idx + 1) * years_per_series)
        series.append(RawSeries(sid, Y[:, cols].T.ravel()))
    pm = reorganize(series, T)

    per_series_meta = MetadataMatrix(Phi_series, tuple(f"t{i}" for i in range(m)), tuple(ids))
    meta = replicate_for_years(per_series_meta, pm.index)
    params = ModelParams(spec, (T, N, m), arrays, None)
    return SyntheticDataset(series, pm, meta, per_series_meta, params, noise_std)


def write_manifest(path, doc: dict) -> None:
    from .containers import atomic_write

    atomic_write(path, (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode())


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
