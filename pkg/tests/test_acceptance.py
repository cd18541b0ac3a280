"""Acceptance suite: one test per shipped guarantee, one printed verdict each.

Quantitative tolerances are part of the contract and are pinned in place;
each test prints ``criterion NN <name>: PASS`` (or FAIL) so the suite can be
read as a checklist.
"""

import json
import math
import time

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import (
    ALL_SPECS,
    make_spec,
    oracle_loss,
    random_instance,
    single_year_index,
)
from sfcast import cli
from sfcast.basis import bspline_basis
from sfcast.baselines import avg_py, knn_forecast
from sfcast.metadata import MetadataMatrix
from sfcast.metrics import MetricConfig, apst
from sfcast.model import ModelSpec, init_params
from sfcast.predictor import (
    WarmObservations,
    forecast_cold,
    forecast_warm,
    impute,
)
from sfcast.profile_matrix import ProfileMatrix, RawSeries, flatten, reorganize
from sfcast.scenarios import generate_synthetic, mask_uniform
from sfcast.trainer import TrainConfig, fit, gradient, loss

from test_basis import oracle_matrix
from test_metrics import oracle_apst


def verdict(num, name, ok):
    print(f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num:02d} {name} failed"


def test_criterion_01_gradient_finite_differences():
    t0 = time.perf_counter()
    T, N, m = 10, 8, 6
    cfg = TrainConfig(lambda1=0.5, lambda2=0.5)
    ok = True
    h = 1e-5
    for variant, mf in ALL_SPECS:
        pm, meta = random_instance(T, N, m, seed=17)
        spec = make_spec(variant, mf, k=2, kprime=2, hidden=4)
        params = init_params(spec, (T, N, m), seed=23)
        grads = gradient(params, pm, meta, cfg)
        for name, g in grads.items():
            flat = params.arrays[name].ravel()
            fd = np.zeros(flat.size)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + h
                up = loss(params, pm, meta, cfg)
                flat[idx] = orig - h
                down = loss(params, pm, meta, cfg)
                flat[idx] = orig
                fd[idx] = (up - down) / (2 * h)
            g = np.ravel(g)
            rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)
            ok &= bool(rel.max() < 1e-5)
    ok &= time.perf_counter() - t0 < 5.0
    verdict(1, "analytic gradients match finite differences", ok)


def test_criterion_02_objective_oracle():
    ok = True
    for trial in range(50):
        variant, mf = ALL_SPECS[trial % len(ALL_SPECS)]
        pm, meta = random_instance(6, 5, 4, seed=trial, mask_density=0.7)
        cfg = TrainConfig(lambda1=0.3 + 0.1 * (trial % 3), lambda2=0.2)
        params = init_params(make_spec(variant, mf), (6, 5, 4), seed=trial + 1)
        ok &= abs(loss(params, pm, meta, cfg) - oracle_loss(params, pm, meta, cfg)) < 1e-12
    verdict(2, "objective equals triple-loop oracle", ok)


def test_criterion_03_metric_oracle():
    ok = True
    for trial in range(100):
        rng = np.random.default_rng(trial)
        Y = rng.normal(size=(5, 4))
        Yhat = Y + rng.normal(scale=0.5, size=(5, 4))
        for rho in (0.5, 2.0, math.inf):
            for kind in ("MSE", "MAE"):
                try:
                    val = apst(Y, Yhat, MetricConfig(rho=rho, kind=kind))
                except Exception:
                    ok = False
                    continue
                ok &= abs(val - oracle_apst(Y, Yhat, rho, kind)) < 1e-12
        d = Yhat - Y
        ok &= apst(Y, Yhat, MetricConfig(kind="MSE")) == pytest.approx(
            float((d * d).mean()), abs=1e-15
        )
        ok &= apst(Y, Yhat, MetricConfig(kind="MAE")) == pytest.approx(
            float(np.abs(d).mean()), abs=1e-15
        )
    verdict(3, "metric equals brute-force oracle", ok)


def test_criterion_04_reorganization_round_trip():
    ok = True
    for trial in range(100):
        rng = np.random.default_rng(trial)
        period = int(rng.integers(2, 15))
        years = int(rng.integers(1, 5))
        vals = rng.normal(size=period * years)
        pm = reorganize([RawSeries("x", vals)], period)
        ok &= np.array_equal(flatten(pm, "x"), vals)
        ok &= pm.n_observed == vals.size
    verdict(4, "reorganize/flatten round trip", ok)


def test_criterion_05_bspline_basis():
    ok = True
    T = 52
    for K in range(4, 21):
        B = bspline_basis(T, K).B
        ok &= B.shape == (T, K + 3)
        ok &= bool(np.all(B >= 0))
        ok &= bool(np.abs(B.sum(axis=1) - 1.0).max() < 1e-9)
        ok &= bool(np.abs(B - oracle_matrix(T, K)).max() < 1e-10)
    verdict(5, "spline basis count, unity, oracle agreement", ok)


def test_criterion_06_planted_regression_recovery():
    t0 = time.perf_counter()
    T, N_train, N_test, m, k = 30, 200, 50, 50, 4
    data = generate_synthetic((T, N_train + N_test, m, k, 0), noise_std=0.0, seed=0)
    pm, meta = data.pm, data.meta
    train_pm = ProfileMatrix(
        pm.data[:, :N_train], pm.mask[:, :N_train], T, single_year_index(N_train)
    )
    train_meta = MetadataMatrix(meta.matrix[:, :N_train], meta.vocab, meta.ids[:N_train])
    spec = ModelSpec("low_rank", regression_rank=k, mf_enabled=False)
    cfg = TrainConfig(lambda1=1e-8, lambda2=1e-8, iterations=3000, step_size=0.2,
                      mode="full_batch", seed=0)
    params, _ = fit(spec, train_pm, train_meta, cfg)
    pred = np.column_stack(
        [forecast_cold(params, meta.matrix[:, [c]]) for c in range(N_train, N_train + N_test)]
    )
    val = apst(pm.data[:, N_train:], pred, MetricConfig())
    ok = val < 1e-3 and time.perf_counter() - t0 < 60.0
    verdict(6, f"cold-start recovery of planted regression (APST_MSE={val:.3e})", ok)


def test_criterion_07_planted_mf_imputation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    T, N, r = 40, 100, 3
    Y = rng.normal(size=(T, r)) @ rng.normal(size=(r, N))
    pm = ProfileMatrix(Y, np.ones((T, N), dtype=bool), T, single_year_index(N))
    train = mask_uniform(pm, 0.2, seed=1)
    meta = MetadataMatrix(
        sp.csc_matrix(np.zeros((2, N))), ("a", "b"), tuple(f"c{i}" for i in range(N))
    )
    spec = ModelSpec("none", mf_enabled=True, mf_rank=r)
    cfg = TrainConfig(lambda1=0.0, lambda2=1e-8, iterations=6000, step_size=0.3,
                      mode="full_batch", seed=0)
    params, _ = fit(spec, train, meta, cfg)
    pred = impute(params, meta, train)
    hidden = pm.mask & ~train.mask
    err = np.linalg.norm((pred - Y)[hidden]) / np.linalg.norm(Y[hidden])
    ok = err < 1e-2 and time.perf_counter() - t0 < 60.0
    verdict(7, f"low-rank imputation of hidden entries (rel err={err:.3e})", ok)


def test_criterion_08_warm_beats_cold():
    T, N, m = 24, 40, 8
    n_train = 30
    prefix = T // 6
    wins = 0
    for seed in range(20):
        data = generate_synthetic((T, N, m, 2, 2), noise_std=0.05, seed=seed)
        pm, meta = data.pm, data.meta
        train_pm = ProfileMatrix(
            pm.data[:, :n_train], pm.mask[:, :n_train], T, single_year_index(n_train)
        )
        train_meta = MetadataMatrix(meta.matrix[:, :n_train], meta.vocab, meta.ids[:n_train])
        spec = ModelSpec("low_rank", regression_rank=2, mf_enabled=True, mf_rank=2)
        cfg = TrainConfig(lambda1=0.01, lambda2=0.01, iterations=1500, step_size=0.1,
                          mode="full_batch", seed=0)
        params, _ = fit(spec, train_pm, train_meta, cfg)
        colds, warms, truths = [], [], []
        for c in range(n_train, N):
            phi = meta.matrix[:, [c]]
            y = pm.data[:, c]
            warm = WarmObservations(phi, tuple((j, y[j]) for j in range(prefix)))
            colds.append(forecast_cold(params, phi)[prefix:])
            warms.append(forecast_warm(params, warm, 0.01)[prefix:])
            truths.append(y[prefix:])
        Yt = np.column_stack(truths)
        m_cold = apst(Yt, np.column_stack(colds), MetricConfig())
        m_warm = apst(Yt, np.column_stack(warms), MetricConfig())
        wins += m_warm < m_cold
    ok = wins >= 18
    verdict(8, f"warm-start beats cold-start ({wins}/20 trials)", ok)


def test_criterion_09_mf_helps_low_rank_residuals():
    wins = 0
    for seed in range(20):
        data = generate_synthetic((20, 60, 10, 2, 2), noise_std=0.05, seed=seed)
        pm, meta = data.pm, data.meta
        train = mask_uniform(pm, 0.2, seed=seed + 1000)
        hidden = pm.mask & ~train.mask
        cfg = TrainConfig(lambda1=0.01, lambda2=0.01, iterations=1200, step_size=0.1,
                          mode="full_batch", seed=0)
        vals = {}
        for mf in (True, False):
            spec = ModelSpec("low_rank", regression_rank=2, mf_enabled=mf, mf_rank=2)
            params, _ = fit(spec, train, meta, cfg)
            pred = impute(params, meta, train)
            vals[mf] = apst(pm.data, pred, MetricConfig(eval_mask=hidden))
        wins += vals[True] < vals[False]
    ok = wins >= 18
    verdict(9, f"factorization term helps imputation ({wins}/20 trials)", ok)


def test_criterion_10_baseline_exactness():
    # periodic, noise-free: the per-index average reproduces every year
    # (dyadic values so the mean over identical years is exact in float64)
    profile = np.arange(12, dtype=float) / 8.0 - 0.5
    pm = reorganize([RawSeries("a", np.tile(profile, 3))], 12)
    pred = avg_py(pm, "a")
    val = apst(np.tile(profile[:, None], 3), np.tile(pred[:, None], 3), MetricConfig())
    ok = val == 0.0

    # exact-duplicate query with k = 1 returns the duplicate's profile
    series = [RawSeries("a", np.arange(6.0)), RawSeries("b", 10 + np.arange(6.0))]
    train_pm = reorganize(series, 6)
    phi = np.array([[1.0, 4.0], [2.0, 8.0]])
    meta = MetadataMatrix(sp.csc_matrix(phi), ("t0", "t1"), ("a", "b"))
    out = knn_forecast(phi[:, 1], meta, train_pm, k=1)
    ok &= np.array_equal(out, avg_py(train_pm, "b"))
    verdict(10, "baseline exactness (past-year average, 1-NN duplicate)", ok)


def test_criterion_11_deterministic_metric_json(tmp_path):
    def pipeline(root):
        data = root / "data"
        cli.run(["synth", "--T", "10", "--N", "20", "--m", "4", "--k", "2",
                 "--kprime", "2", "--noise-std", "0.1", "--seed", "5",
                 "--out-dir", str(data)])
        cfgp = root / "train.ini"
        cfgp.write_text(
            "[model]\nvariant = low_rank\nk = 2\nkprime = 2\n"
            "[train]\niterations = 200\nmode = full_batch\nseed = 3\nstep_size = 0.05\n"
        )
        model = root / "model.sfmd"
        cli.run(["train", "--matrix", str(data / "matrix.sfpm"),
                 "--metadata", str(data / "meta.sfsm"),
                 "--config", str(cfgp), "--out", str(model)])
        fc = root / "fc"
        cli.run(["forecast", "impute", "--model", str(model),
                 "--matrix", str(data / "matrix.sfpm"),
                 "--metadata", str(data / "meta.sfsm"), "--out-dir", str(fc)])
        rep = root / "report.json"
        cli.run(["evaluate", "--truth", str(data / "matrix.sfpm"),
                 "--pred", str(fc / "imputed.sfpm"), "--out", str(rep)])
        return rep.read_bytes()

    run1 = pipeline(tmp_path / "r1")
    run2 = pipeline(tmp_path / "r2")
    ok = run1 == run2 and json.loads(run1)["metric"] == "APST_MSE"
    verdict(11, "identical manifests give byte-identical metric JSON", ok)


def test_criterion_12_full_batch_monotonicity():
    data = generate_synthetic((16, 30, 6, 2, 2), noise_std=0.2, seed=2, smooth=True)
    cfg = TrainConfig(lambda1=0.1, lambda2=0.1, iterations=2000, step_size=1e-3,
                      mode="full_batch", trace_every=1, seed=0)
    spec = ModelSpec("low_rank", regression_rank=2, mf_enabled=True, mf_rank=2)
    _, report = fit(spec, data.pm, data.meta, cfg)
    vals = np.array([v for _, v in report.loss_trace])
    ok = len(vals) == 2001 and bool(np.all(np.diff(vals) <= 1e-12))
    verdict(12, "full-batch loss trace is non-increasing over 2000 steps", ok)
