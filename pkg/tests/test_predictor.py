import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import minimize

from conftest import make_spec, random_instance, single_year_index
from sfcast.errors import ShapeError, UnderdeterminedError
from sfcast.metadata import MetadataMatrix
from sfcast.model import init_params
from sfcast.predictor import (
    WarmObservations,
    estimate_latent,
    forecast_cold,
    forecast_warm,
    forecast_warm_refit,
    impute,
    write_forecast,
)
from sfcast.profile_matrix import ProfileMatrix
from sfcast.trainer import TrainConfig


def test_cold_is_regression_plus_bias():
    params = init_params(make_spec("full", True), (4, 3, 2), seed=1)
    phi = np.array([1.0, 2.0])
    expected = params.arrays["W"] @ phi + params.arrays["b"]
    np.testing.assert_allclose(forecast_cold(params, phi), expected, atol=1e-14)


def test_latent_exact_when_fully_observed():
    # with T observations, zero noise, and lambda2 -> 0 the estimate is exact
    params = init_params(make_spec("full", True, kprime=2), (6, 3, 2), seed=2)
    phi = np.array([0.5, -1.0])
    r_true = np.array([1.0, -2.0])
    truth = forecast_cold(params, phi) + params.arrays["L"] @ r_true
    warm = WarmObservations(phi, tuple((j, truth[j]) for j in range(6)))
    r_hat = estimate_latent(params, warm, lambda2=0.0)
    np.testing.assert_allclose(r_hat, r_true, atol=1e-8)
    np.testing.assert_allclose(forecast_warm(params, warm, 0.0), truth, atol=1e-8)


def test_latent_matches_numeric_minimizer(rng):
    params = init_params(make_spec("low_rank", True, kprime=3), (8, 4, 5), seed=3)
    phi = rng.normal(size=5)
    obs = tuple((j, float(rng.normal())) for j in [0, 2, 5, 7])
    warm = WarmObservations(phi, obs)
    lam = 0.7
    r_hat = estimate_latent(params, warm, lam)

    base = forecast_cold(params, phi)
    L = params.arrays["L"]

    def objective(r):
        total = lam * float(r @ r)
        for j, v in obs:
            total += (v - base[j] - L[j] @ r) ** 2
        return total

    res = minimize(objective, np.zeros(3), method="BFGS", tol=1e-14)
    np.testing.assert_allclose(r_hat, res.x, atol=1e-8)
    assert objective(r_hat) <= res.fun + 1e-10


def test_latent_norm_shrinks_with_lambda(rng):
    params = init_params(make_spec("full", True, kprime=2), (10, 3, 2), seed=5)
    phi = rng.normal(size=2)
    warm = WarmObservations(phi, tuple((j, float(rng.normal())) for j in range(5)))
    norms = [
        float(np.linalg.norm(estimate_latent(params, warm, lam)))
        for lam in (0.01, 0.1, 1.0, 10.0)
    ]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


def test_underdetermined_without_ridge():
    # one observation, two latent dimensions, lambda2 = 0: singular system
    params = init_params(make_spec("full", True, kprime=2), (5, 3, 2), seed=0)
    warm = WarmObservations(np.zeros(2), ((0, 1.0),))
    with pytest.raises(UnderdeterminedError):
        estimate_latent(params, warm, 0.0)
    # ridge makes it solvable
    r = estimate_latent(params, warm, 1.0)
    assert r.shape == (2,)


def test_warm_without_observations_falls_back_to_cold():
    params = init_params(make_spec("full", True), (4, 3, 2), seed=1)
    phi = np.ones(2)
    warm = WarmObservations(phi, ())
    with pytest.warns(UserWarning):
        out = forecast_warm(params, warm, 1.0)
    np.testing.assert_array_equal(out, forecast_cold(params, phi))


def test_warm_equals_cold_when_factors_vanish():
    params = init_params(make_spec("full", True), (5, 3, 2), seed=7)
    params.arrays["L"][:] = 0.0
    phi = np.ones(2)
    warm = WarmObservations(phi, ((1, 0.3), (3, -0.2)))
    np.testing.assert_allclose(
        forecast_warm(params, warm, 1.0), forecast_cold(params, phi), atol=1e-12
    )


def test_warm_observations_validation():
    with pytest.raises(ShapeError):
        WarmObservations(np.ones(2), ((0, 1.0), (0, 2.0)))
    with pytest.raises(ShapeError):
        WarmObservations(np.ones(2), ((0, np.nan),))


def test_warm_refit_reproduces_planted_column():
    # train data generated by a known model; the warm column obeys it too
    rng = np.random.default_rng(11)
    T, N, m = 8, 20, 4
    truth = init_params(make_spec("full", True, kprime=1), (T, N + 1, m), seed=13)
    phi = np.abs(rng.normal(size=(m, N + 1)))
    R = rng.normal(size=(1, N + 1))
    Y = truth.arrays["W"] @ phi + truth.arrays["b"][:, None] + truth.arrays["L"] @ R
    pm = ProfileMatrix(Y[:, :N], np.ones((T, N), dtype=bool), T, single_year_index(N))
    meta = MetadataMatrix(sp.csc_matrix(phi[:, :N]), tuple(f"t{i}" for i in range(m)),
                          tuple(f"c{i}" for i in range(N)))
    warm = WarmObservations(phi[:, N], tuple((j, Y[j, N]) for j in range(0, T, 2)))
    cfg = TrainConfig(lambda1=1e-8, lambda2=1e-8, iterations=4000, step_size=0.05,
                      mode="full_batch", seed=1)
    pred = forecast_warm_refit(truth.spec, pm, meta, warm, cfg)
    assert np.sqrt(np.mean((pred - Y[:, N]) ** 2)) < 0.05


def test_impute_matches_manual_assembly():
    pm, meta = random_instance(6, 5, 4, seed=21)
    params = init_params(make_spec("low_rank", True), (6, 5, 4), seed=3)
    out = impute(params, meta, pm)
    a = params.arrays
    expected = (
        a["H"] @ (a["U"] @ meta.matrix.toarray())
        + a["b"][:, None]
        + a["L"] @ a["R"]
    )
    np.testing.assert_allclose(out, expected, atol=1e-12)
    assert out.shape == pm.shape


def test_impute_without_mf():
    pm, meta = random_instance(6, 5, 4, seed=22)
    params = init_params(make_spec("full", False), (6, 5, 4), seed=3)
    out = impute(params, meta, pm)
    expected = params.arrays["W"] @ meta.matrix.toarray() + params.arrays["b"][:, None]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_impute_column_count_checked():
    pm, _ = random_instance(6, 5, 4, seed=0)
    _, meta = random_instance(6, 3, 4, seed=0)
    params = init_params(make_spec("full", True), (6, 3, 4), seed=0)
    with pytest.raises(ShapeError):
        impute(params, meta, pm)


def test_write_forecast_round_trip(tmp_path):
    path = tmp_path / "f.csv"
    vals = np.array([0.25, -1.5, 3.0])
    write_forecast(path, "s1", vals)
    lines = path.read_text().splitlines()
    assert lines[0] == "series_id,t,value"
    parsed = [float(line.split(",")[2]) for line in lines[1:]]
    np.testing.assert_array_equal(parsed, vals)
