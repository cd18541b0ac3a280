"""Regularized least-squares fitting by mini-batch SGD with restarts.

The objective, over observed cells Omega of the stacked matrix Y:

    (1/2N) sum_{(j,i) in Omega} (Y_ji - f(phi_i)_j - L_j' R_i - b_j)^2
    + (lambda1/2N) R_f(f) + (lambda2/2N) (||L||_F^2 + ||R||_F^2)

R_f is the squared Frobenius norm of the regression factor matrices
(nothing for the neural variant).  Minibatches sample columns uniformly
with replacement; regularization enters every step at full strength.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import masked_residual
from .errors import DivergenceError, NoObservationsError, ShapeError
from .metadata import MetadataMatrix
from .model import (
    REGULARIZED,
    ModelParams,
    ModelSpec,
    _dot,
    init_params,
    regression_batch,
)
from .profile_matrix import ProfileMatrix

DIVERGENCE_CAP = 1e12


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    minibatch: int = 300
    iterations: int = 1000
    step_size: float = 1e-2
    restarts: int = 1
    seed: int = 0
    mode: str = "stochastic"  # or "full_batch"
    trace_every: int = 0  # 0 = auto (~100 samples)

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ShapeError("regularization strengths must be >= 0")
        if self.minibatch < 1 or self.iterations < 1 or self.restarts < 1:
            raise ShapeError("minibatch, iterations, restarts must be >= 1")
        if self.step_size <= 0:
            raise ShapeError("step_size must be > 0")
        if self.mode not in ("stochastic", "full_batch"):
            raise ShapeError(f"unknown mode {self.mode!r}")


@dataclass
class FitReport:
    final_loss: float
    loss_trace: list = field(default_factory=list)  # (iteration, loss) pairs
    restart_losses: list = field(default_factory=list)
    wall_time: float = 0.0

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,loss\n")
            for it, val in self.loss_trace:
                fh.write(f"{it},{float(val)!r}\n")


def _dot_t(G: np.ndarray, Phi) -> np.ndarray:
    """G @ Phi.T for a sparse or dense metadata block Phi."""
    return np.asarray((Phi @ G.T).T) if hasattr(Phi, "tocsc") else G @ Phi.T


def _reg_penalty(params: ModelParams, cfg: TrainConfig, N: int) -> float:
    total = 0.0
    for name in REGULARIZED[params.spec.regression_variant]:
        a = params.arrays[name]
        total += cfg.lambda1 / (2 * N) * float(np.vdot(a, a))
    if params.spec.mf_enabled:
        L, R = params.arrays["L"], params.arrays["R"]
        total += cfg.lambda2 / (2 * N) * (float(np.vdot(L, L)) + float(np.vdot(R, R)))
    return total


def loss(
    params: ModelParams, pm: ProfileMatrix, meta: MetadataMatrix, cfg: TrainConfig
) -> float:
    """Full-data objective value."""
    if pm.n_observed == 0:
        raise NoObservationsError("no observed entries")
    N = pm.shape[1]
    F = regression_batch(params, meta.matrix)
    a = params.arrays
    L = a.get("L")
    R = a.get("R")
    _, sse = masked_residual(pm.data, pm.mask, F, L, R, a["b"])
    return sse / (2 * N) + _reg_penalty(params, cfg, N)


def gradient(
    params: ModelParams,
    pm: ProfileMatrix,
    meta: MetadataMatrix,
    cfg: TrainConfig,
    batch: np.ndarray | None = None,
) -> dict:
    """Exact gradient of the batch-restricted objective, keyed like the params.

    The residual sum runs over observed cells of the batch columns with the
    full-objective 1/2N scaling; regularization terms are included at full
    strength.  ``batch=None`` means all columns.
    """
    N = pm.shape[1]
    spec = params.spec
    a = params.arrays
    if batch is None:
        batch = np.arange(N)
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise ShapeError("empty batch")

    Yb = pm.data[:, batch]
    Mb = pm.mask[:, batch]
    Phib = meta.matrix[:, batch]
    L = a.get("L")
    Rb = a["R"][:, batch] if spec.mf_enabled else None

    variant = spec.regression_variant
    s = 1.0 / N
    grads: dict[str, np.ndarray] = {}

    if variant == "neural":
        # forward pass kept here so the backward pass can reuse activations
        z1 = _dot(a["W1"], Phib) + a["b1"][:, None]
        a1 = np.maximum(z1, 0.0)
        z2 = a["W2"] @ a1 + a["b2"][:, None]
        a2 = np.maximum(z2, 0.0)
        F = a["W3"] @ a2 + a["b3"][:, None]
    else:
        F = regression_batch(params, Phib)

    E, _ = masked_residual(Yb, Mb, F, L, Rb, a["b"])

    grads["b"] = s * E.sum(axis=1)
    if spec.mf_enabled:
        grads["L"] = s * (E @ Rb.T) + (cfg.lambda2 / N) * L
        dR = (cfg.lambda2 / N) * a["R"]
        dR[:, batch] += s * (L.T @ E)
        grads["R"] = dR

    l1 = cfg.lambda1 / N
    if variant == "full":
        grads["W"] = s * _dot_t(E, Phib) + l1 * a["W"]
    elif variant == "low_rank":
        V = _dot(a["U"], Phib)
        grads["H"] = s * (E @ V.T) + l1 * a["H"]
        grads["U"] = s * _dot_t(a["H"].T @ E, Phib) + l1 * a["U"]
    elif variant == "functional":
        grads["Q"] = s * _dot_t(params.basis.B.T @ E, Phib) + l1 * a["Q"]
    elif variant == "neural":
        dout = s * E
        grads["W3"] = dout @ a2.T
        grads["b3"] = dout.sum(axis=1)
        dz2 = (a["W3"].T @ dout) * (z2 > 0)
        grads["W2"] = dz2 @ a1.T
        grads["b2"] = dz2.sum(axis=1)
        dz1 = (a["W2"].T @ dz2) * (z1 > 0)
        grads["W1"] = _dot_t(dz1, Phib)
        grads["b1"] = dz1.sum(axis=1)
    return grads


def _run_restart(spec, pm, meta, cfg, restart_seed):
    N = pm.shape[1]
    dims = (pm.period, N, meta.m)
    params = init_params(spec, dims, restart_seed)
    rng = np.random.default_rng((restart_seed, 0x5FCA57))
    trace_every = cfg.trace_every or max(1, cfg.iterations // 100)

    trace = [(0, loss(params, pm, meta, cfg))]
    full = cfg.mode == "full_batch"
    for it in range(1, cfg.iterations + 1):
        batch = None if full else rng.integers(0, N, size=cfg.minibatch)
        grads = gradient(params, pm, meta, cfg, batch)
        for name, g in grads.items():
            params.arrays[name] -= cfg.step_size * g
        if it % trace_every == 0 or it == cfg.iterations:
            val = loss(params, pm, meta, cfg)
            trace.append((it, val))
            if not np.isfinite(val) or val > DIVERGENCE_CAP:
                return params, trace, float("inf")
    return params, trace, trace[-1][1]


def fit(
    spec: ModelSpec,
    pm: ProfileMatrix,
    meta: MetadataMatrix,
    cfg: TrainConfig,
    workers: int = 1,
) -> tuple[ModelParams, FitReport]:
    """Train with ``cfg.restarts`` seeded initializations; return the best.

    Each restart runs ``cfg.iterations`` constant-step updates.  A restart
    whose loss goes non-finite (or past 1e12) is abandoned; if every restart
    diverges a DivergenceError carries the partial report.  Restarts are
    independent; ``workers`` > 1 runs them in a thread pool, with results
    reduced in restart order so the outcome is unchanged.
    """
    if meta.n_columns != pm.shape[1]:
        raise ShapeError(
            f"metadata has {meta.n_columns} columns, matrix has {pm.shape[1]}"
        )
    t0 = time.perf_counter()
    if workers > 1 and cfg.restarts > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda r: _run_restart(spec, pm, meta, cfg, cfg.seed + r),
                    range(cfg.restarts),
                )
            )
    else:
        results = [
            _run_restart(spec, pm, meta, cfg, cfg.seed + r) for r in range(cfg.restarts)
        ]
    best = None
    best_trace = None
    restart_losses = []
    for params, trace, final in results:
        restart_losses.append(final)
        if best is None or final < best[1]:
            best = (params, final)
            best_trace = trace
    report = FitReport(
        final_loss=best[1],
        loss_trace=best_trace,
        restart_losses=restart_losses,
        wall_time=time.perf_counter() - t0,
    )
    if not np.isfinite(best[1]):
        raise DivergenceError(
            f"all {cfg.restarts} restarts diverged at step size {cfg.step_size}",
            report=report,
        )
    return best[0], report
