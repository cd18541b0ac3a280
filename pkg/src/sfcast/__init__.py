"""Joint regression + matrix-factorization forecasting of seasonal profiles.

A year-stacked observation matrix is modeled as regression from per-series
metadata plus a low-rank residual factorization, supporting long-range,
cold-start, warm-start, and missing-data prediction.
"""

from ._kernels import HAVE_COMPILED
from .basis import BasisMatrix, bspline_basis
from .metadata import MetadataMatrix, replicate_for_years, tfidf_featurize
from .metrics import MetricConfig, apst
from .model import ModelParams, ModelSpec, eval_column, eval_regression, init_params
from .predictor import (
    WarmObservations,
    estimate_latent,
    forecast_cold,
    forecast_warm,
    impute,
)
from .profile_matrix import (
    ProfileMatrix,
    RawSeries,
    SeriesYearIndex,
    StandardizationStats,
    flatten,
    reorganize,
    standardize,
)
from .trainer import FitReport, TrainConfig, fit, gradient, loss

__version__ = "0.1.0"

__all__ = [
    "BasisMatrix",
    "FitReport",
    "HAVE_COMPILED",
    "MetadataMatrix",
    "MetricConfig",
    "ModelParams",
    "ModelSpec",
    "ProfileMatrix",
    "RawSeries",
    "SeriesYearIndex",
    "StandardizationStats",
    "TrainConfig",
    "WarmObservations",
    "apst",
    "bspline_basis",
    "estimate_latent",
    "eval_column",
    "eval_regression",
    "fit",
    "flatten",
    "forecast_cold",
    "forecast_warm",
    "gradient",
    "impute",
    "init_params",
    "loss",
    "reorganize",
    "replicate_for_years",
    "standardize",
    "tfidf_featurize",
]
