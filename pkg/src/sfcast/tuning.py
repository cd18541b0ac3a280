"""Hyperparameter selection: grids, folds, two-stage cross-validation.

Stage 1 tunes the regression regularization (and knot count, for the
functional variant) on the non-MF reduction of the model; stage 2 fixes the
winners and tunes the factorization regularization on the full model.
Validation hides whole columns and scores held-out entries with APST_MSE.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidGridError, SfcastError
from .metadata import MetadataMatrix
from .metrics import MetricConfig, apst
from .model import ModelSpec
from .predictor import impute
from .profile_matrix import ProfileMatrix
from .trainer import TrainConfig, fit


@dataclass(frozen=True)
class Grid:
    lambda1: tuple = ()
    lambda2: tuple = ()
    knots: tuple = ()  # functional variant only

    def __post_init__(self):
        for vals in (self.lambda1, self.lambda2):
            if any(v <= 0 for v in vals):
                raise InvalidGridError("grid values must be > 0")


@dataclass
class CvResult:
    candidates: list  # (candidate dict, mean metric or inf if failed)
    chosen: dict
    fold_assignment: np.ndarray | None = None
    stage2: list = field(default_factory=list)


def log_grid(lo: float, hi: float, n: int) -> list:
    """n values geometrically spaced from lo to hi, endpoints inclusive."""
    if not (0 < lo < hi):
        raise InvalidGridError(f"need 0 < lo < hi, got ({lo}, {hi})")
    if n < 2:
        raise InvalidGridError("need n >= 2")
    return list(np.geomspace(lo, hi, n))


def kfold_columns(N: int, folds: int, seed: int) -> np.ndarray:
    """Deterministic near-equal column partition; entry i is column i's fold."""
    if folds > N:
        raise InvalidGridError(f"folds={folds} exceeds N={N}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(N)
    assignment = np.empty(N, dtype=np.intp)
    for f, chunk in enumerate(np.array_split(order, folds)):
        assignment[chunk] = f
    return assignment


def _validation_metric(spec, pm, meta, cfg, holdout_cols, rho):
    """Hide the fold columns, fit, score held-out entries with APST_MSE."""
    mask = pm.mask.copy()
    eval_mask = np.zeros_like(mask)
    eval_mask[:, holdout_cols] = pm.mask[:, holdout_cols]
    mask[:, holdout_cols] = False
    train = pm.with_mask(mask)
    params, _ = fit(spec, train, meta, cfg)
    pred = impute(params, meta, pm)
    return apst(pm.data, pred, MetricConfig(rho=rho, kind="MSE", eval_mask=eval_mask))


def two_stage_cv(
    spec: ModelSpec,
    pm: ProfileMatrix,
    meta: MetadataMatrix,
    grid: Grid,
    cfg: TrainConfig,
    folds: int = 5,
    rho: float = math.inf,
    holdout_fraction: float | None = None,
) -> CvResult:
    """Two-stage grid search.

    With ``holdout_fraction`` set, a single seeded validation split replaces
    k-fold (the large-data protocol).  Failed candidates are excluded with a
    warning.  Ties break toward the smallest regularization.
    """
    N = pm.shape[1]
    if holdout_fraction is not None:
        n_val = max(1, round(holdout_fraction * N))
        rng = np.random.default_rng(cfg.seed)
        val_cols = rng.choice(N, size=n_val, replace=False)
        fold_cols = [np.sort(val_cols)]
        assignment = None
    else:
        assignment = kfold_columns(N, folds, cfg.seed)
        fold_cols = [np.nonzero(assignment == f)[0] for f in range(folds)]

    def mean_metric(candidate_spec, candidate_cfg):
        vals = []
        for cols in fold_cols:
            try:
                vals.append(_validation_metric(candidate_spec, pm, meta, candidate_cfg, cols, rho))
            except SfcastError as exc:
                warnings.warn(f"candidate failed: {exc}")
                return math.inf
        return float(np.mean(vals))

    # stage 1: regression hyperparameters on the non-MF reduction
    chosen = {"lambda1": None, "knots": None, "lambda2": None}
    stage1 = []
    variant = spec.regression_variant
    lambda1s = grid.lambda1 if variant not in ("neural", "none") else ()
    knot_vals = tuple(sorted(grid.knots)) if variant == "functional" and grid.knots else (None,)
    if lambda1s:
        for lam1, K in itertools.product(sorted(lambda1s), knot_vals):
            cand_spec = spec.without_mf() if K is None else replace(spec.without_mf(), knots=K)
            cand_cfg = replace(cfg, lambda1=lam1)
            metric = mean_metric(cand_spec, cand_cfg)
            stage1.append(({"lambda1": lam1, "knots": K}, metric))
        best = min(stage1, key=lambda c: (c[1], c[0]["lambda1"], c[0]["knots"] or 0))
        if math.isinf(best[1]):
            raise InvalidGridError("every stage-1 candidate failed")
        chosen["lambda1"] = best[0]["lambda1"]
        chosen["knots"] = best[0]["knots"]

    # stage 2: factorization regularization on the full model
    stage2 = []
    if spec.mf_enabled:
        spec2 = spec if chosen["knots"] is None else replace(spec, knots=chosen["knots"])
        base_cfg = cfg if chosen["lambda1"] is None else replace(cfg, lambda1=chosen["lambda1"])
        for lam2 in sorted(grid.lambda2):
            metric = mean_metric(spec2, replace(base_cfg, lambda2=lam2))
            stage2.append(({"lambda2": lam2}, metric))
        best2 = min(stage2, key=lambda c: (c[1], c[0]["lambda2"]))
        if math.isinf(best2[1]):
            raise InvalidGridError("every stage-2 candidate failed")
        chosen["lambda2"] = best2[0]["lambda2"]

    return CvResult(stage1, chosen, assignment, stage2)


def write_cv_report(path, result: CvResult) -> None:
    with open(path, "w") as fh:
        fh.write("stage,candidate,mean_metric\n")
        for cand, metric in result.candidates:
            fh.write(f"1,{cand},{float(metric)!r}\n")
        for cand, metric in result.stage2:
            fh.write(f"2,{cand},{float(metric)!r}\n")
        fh.write(f"chosen,{result.chosen},\n")
