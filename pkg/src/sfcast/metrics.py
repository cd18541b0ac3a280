"""Average-per-series thresholded MSE/MAE.

Per evaluated column, error is averaged over entries whose true magnitude is
within the threshold rho; the metric is the mean of those per-column
averages.  rho = inf reduces to plain MSE/MAE.  Columns with no evaluable
entries are skipped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoEvaluableEntriesError, ShapeError


@dataclass(frozen=True)
class MetricConfig:
    rho: float = math.inf
    kind: str = "MSE"  # or "MAE"
    eval_mask: np.ndarray | None = None  # entries to score; None = all

    def __post_init__(self):
        if not self.rho > 0:
            raise ShapeError("rho must be > 0")
        if self.kind not in ("MSE", "MAE"):
            raise ShapeError(f"unknown metric kind {self.kind!r}")


def apst(Y_test: np.ndarray, Y_hat: np.ndarray, cfg: MetricConfig) -> float:
    """Average per-series thresholded error between truth and prediction."""
    Y_test = np.asarray(Y_test, dtype=np.float64)
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    if Y_test.shape != Y_hat.shape:
        raise ShapeError(f"shape mismatch {Y_test.shape} vs {Y_hat.shape}")
    if Y_test.ndim == 1:
        Y_test = Y_test[:, None]
        Y_hat = Y_hat[:, None]

    include = np.abs(Y_test) <= cfg.rho
    if cfg.eval_mask is not None:
        include &= np.asarray(cfg.eval_mask, dtype=bool).reshape(include.shape)

    diff = Y_hat - Y_test
    err = diff * diff if cfg.kind == "MSE" else np.abs(diff)
    counts = include.sum(axis=0)
    scored = counts > 0
    if not scored.any():
        raise NoEvaluableEntriesError("no column has evaluable entries")
    sums = np.where(include, err, 0.0).sum(axis=0)
    return float((sums[scored] / counts[scored]).mean())


def report(Y_test, Y_hat, cfg: MetricConfig) -> dict:
    """Metric value plus bookkeeping, ready for JSON export."""
    Y = np.asarray(Y_test, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    include = np.abs(Y) <= cfg.rho
    if cfg.eval_mask is not None:
        include &= np.asarray(cfg.eval_mask, dtype=bool).reshape(include.shape)
    return {
        "metric": f"APST_{cfg.kind}",
        "rho": None if math.isinf(cfg.rho) else cfg.rho,
        "n_series_scored": int((include.sum(axis=0) > 0).sum()),
        "value": apst(Y_test, Y_hat, cfg),
    }


def write_report(path, rep: dict) -> None:
    from .containers import atomic_write

    atomic_write(path, (json.dumps(rep, sort_keys=True) + "\n").encode())
