"""Model family Y_i = f(phi_i) + L R_i + b and its forward evaluation.

Regression variants for f:

* ``full``        W phi                (W: T x m)
* ``low_rank``    H U phi              (H: T x k, U: k x m)
* ``functional``  B Q phi              (B fixed cubic spline basis, Q learned)
* ``neural``      two hidden ReLU layers, linear output
* ``none``        zero (matrix factorization alone)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .basis import BasisMatrix, bspline_basis
from .errors import ShapeError

VARIANTS = ("full", "low_rank", "functional", "neural", "none")


@dataclass(frozen=True)
class ModelSpec:
    regression_variant: str = "low_rank"
    regression_rank: int = 5  # k, low_rank only
    knots: int = 8  # K, functional only
    hidden: int = 100  # first hidden layer width, neural only
    mf_enabled: bool = True
    mf_rank: int = 5  # k'
    noise_std: float = 1.0  # documentation of the generative noise; unused in training

    def __post_init__(self):
        if self.regression_variant not in VARIANTS:
            raise ShapeError(f"unknown variant {self.regression_variant!r}")
        if self.regression_variant == "low_rank" and self.regression_rank < 1:
            raise ShapeError("regression_rank must be >= 1")
        if self.mf_enabled and self.mf_rank < 1:
            raise ShapeError("mf_rank must be >= 1")

    def without_mf(self) -> "ModelSpec":
        return replace(self, mf_enabled=False)


@dataclass
class ModelParams:
    """Learned arrays, keyed by name; mutated only inside the trainer."""

    spec: ModelSpec
    dims: tuple  # (T, N, m)
    arrays: dict = field(default_factory=dict)
    basis: BasisMatrix | None = None  # functional variant only

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.spec,
            self.dims,
            {k: v.copy() for k, v in self.arrays.items()},
            self.basis,
        )

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    @property
    def T(self) -> int:
        return self.dims[0]


def _dot(A: np.ndarray, phi) -> np.ndarray:
    """A @ phi where phi may be a scipy sparse matrix."""
    if sp.issparse(phi):
        return (phi.T @ A.T).T
    return A @ phi


def _as_columns(phi, m: int):
    """Coerce phi to an m x c column block (sparse passes through)."""
    if sp.issparse(phi):
        if phi.shape[0] != m:
            raise ShapeError(f"phi has {phi.shape[0]} rows, expected {m}")
        return phi
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim == 1:
        phi = phi[:, None]
    if phi.shape[0] != m:
        raise ShapeError(f"phi has {phi.shape[0]} rows, expected {m}")
    return phi


def regression_batch(params: ModelParams, Phi) -> np.ndarray:
    """f(phi) for a block of metadata columns; returns T x c."""
    T, _, m = params.dims
    Phi = _as_columns(Phi, m)
    c = Phi.shape[1]
    variant = params.spec.regression_variant
    a = params.arrays
    if variant == "none":
        return np.zeros((T, c))
    if variant == "full":
        return _dot(a["W"], Phi)
    if variant == "low_rank":
        return a["H"] @ _dot(a["U"], Phi)
    if variant == "functional":
        return params.basis.B @ _dot(a["Q"], Phi)
    # neural
    z1 = _dot(a["W1"], Phi) + a["b1"][:, None]
    z2 = a["W2"] @ np.maximum(z1, 0.0) + a["b2"][:, None]
    return a["W3"] @ np.maximum(z2, 0.0) + a["b3"][:, None]


def eval_regression(params: ModelParams, phi) -> np.ndarray:
    """f(phi) for a single metadata vector; returns a length-T vector."""
    return regression_batch(params, phi)[:, 0]


def eval_column(params: ModelParams, phi, r=None) -> np.ndarray:
    """Mean prediction f(phi) + L r + b for one column."""
    spec = params.spec
    if spec.mf_enabled != (r is not None):
        raise ShapeError("latent factor r required exactly when MF is enabled")
    out = eval_regression(params, phi) + params.arrays["b"]
    if r is not None:
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (spec.mf_rank,):
            raise ShapeError(f"r must have shape ({spec.mf_rank},)")
        out = out + params.arrays["L"] @ r
    return out


def init_params(spec: ModelSpec, dims: tuple, seed: int) -> ModelParams:
    """Gaussian(0, 0.01-variance) factor matrices, zero bias, seeded."""
    T, N, m = dims
    rng = np.random.default_rng(seed)
    scale = 0.1

    def g(*shape):
        return rng.normal(0.0, scale, size=shape)

    arrays = {}
    basis = None
    v = spec.regression_variant
    if v == "full":
        arrays["W"] = g(T, m)
    elif v == "low_rank":
        k = spec.regression_rank
        arrays["H"] = g(T, k)
        arrays["U"] = g(k, m)
    elif v == "functional":
        basis = bspline_basis(T, spec.knots)
        arrays["Q"] = g(basis.n_basis, m)
    elif v == "neural":
        h = spec.hidden
        arrays["W1"] = g(h, m)
        arrays["b1"] = g(h)
        arrays["W2"] = g(T, h)
        arrays["b2"] = g(T)
        arrays["W3"] = g(T, T)
        arrays["b3"] = g(T)
    if spec.mf_enabled:
        arrays["L"] = g(T, spec.mf_rank)
        arrays["R"] = g(spec.mf_rank, N)
    arrays["b"] = np.zeros(T)
    return ModelParams(spec, (T, N, m), arrays, basis)


REGULARIZED = {
    "full": ("W",),
    "low_rank": ("H", "U"),
    "functional": ("Q",),
    "neural": (),  # neural weights are left unregularized
    "none": (),
}
