"""Bayesian tuner: GP numerics, UCB search behavior, budget contracts."""

import numpy as np
import pytest

from meritopt.errors import TrainingError, ValidationError
from meritopt.hyper_tuner import (
    TuningBudget,
    bo_minimize,
    fit_gp,
    matern52,
    tune,
)
from meritopt.learners import default_hyperparams
from meritopt.super_learner import cv_mse, kfold_split
from conftest import make_engine_data


# -- kernel and GP -------------------------------------------------------------


def test_matern52_basics():
    A = np.array([[0.0, 0.0], [1.0, 0.0]])
    K = matern52(A, A, length=1.0, var=2.0)
    assert K[0, 0] == pytest.approx(2.0)
    assert K[0, 1] == K[1, 0]
    assert 0.0 < K[0, 1] < 2.0


def test_matern52_decays_with_distance():
    A = np.zeros((1, 3))
    B = np.array([[0.1, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
    row = matern52(A, B, length=0.5, var=1.0)[0]
    assert row[0] > row[1] > row[2] > 0.0


def test_gp_posterior_matches_dense_solve():
    rng = np.random.default_rng(0)
    for trial in range(5):
        m, d = int(rng.integers(3, 11)), int(rng.integers(1, 4))
        Xn = rng.random((m, d))
        z = rng.standard_normal(m)
        gp = fit_gp(Xn, z)
        assert gp is not None
        cands = rng.random((6, d))
        mu, sigma = gp.posterior(cands)

        K = matern52(Xn, Xn, gp.length, gp.var) + gp.noise * np.eye(m)
        Kc = matern52(Xn, cands, gp.length, gp.var)
        K_inv = np.linalg.inv(K)
        mu_ref = Kc.T @ K_inv @ z
        var_ref = np.maximum(gp.var - np.sum(Kc * (K_inv @ Kc), axis=0), 0.0)
        assert np.max(np.abs(mu - mu_ref)) < 1e-8
        assert np.max(np.abs(sigma - np.sqrt(var_ref))) < 1e-8


def test_gp_interpolates_training_scores_with_small_noise():
    rng = np.random.default_rng(1)
    Xn = rng.random((8, 2))
    z = np.sin(3 * Xn[:, 0]) + Xn[:, 1]
    gp = fit_gp(Xn, z)
    mu, sigma = gp.posterior(Xn)
    assert np.max(np.abs(mu - z)) < 0.05
    assert np.all(sigma < 0.05)


# -- budget ---------------------------------------------------------------------


def test_budget_validation():
    with pytest.raises(ValidationError):
        TuningBudget(n_initial=1, n_total=10)
    with pytest.raises(ValidationError):
        TuningBudget(n_initial=10, n_total=5)
    assert TuningBudget(n_initial=2, n_total=2).n_total == 2


# -- bo_minimize ------------------------------------------------------------------


def test_bo_minimize_finds_quadratic_minimum():
    target = np.array([0.3, 0.7])

    def f(v):
        return float(np.sum((v - target) ** 2))

    x, fx = bo_minimize(f, [(0.0, 1.0), (0.0, 1.0)], TuningBudget(8, 30), seed=0)
    assert fx < 0.01
    assert np.max(np.abs(x - target)) < 0.1


def test_bo_minimize_determinism():
    def f(v):
        return float(np.sum(v**2))

    bounds = [(-1.0, 1.0)] * 3
    a = bo_minimize(f, bounds, TuningBudget(4, 12), seed=5)
    b = bo_minimize(f, bounds, TuningBudget(4, 12), seed=5)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_bo_minimize_tolerates_partial_failures():
    def f(v):
        if v[0] > 0.5:
            raise TrainingError("infeasible half-space")
        return float(v[0])

    x, fx = bo_minimize(f, [(0.0, 1.0)], TuningBudget(6, 18), seed=2)
    assert x[0] <= 0.5 and fx == pytest.approx(x[0])


def test_bo_minimize_raises_when_everything_fails():
    def f(v):
        raise TrainingError("always broken")

    with pytest.raises(TrainingError):
        bo_minimize(f, [(0.0, 1.0)], TuningBudget(3, 5), seed=0)


def test_bo_minimize_rejects_bad_bounds():
    with pytest.raises(ValidationError):
        bo_minimize(lambda v: 0.0, [(1.0, 0.0)], TuningBudget(2, 3), seed=0)


# -- tune -------------------------------------------------------------------------


def test_tune_never_worse_than_defaults_on_same_folds():
    X, Y = make_engine_data(40, seed=3)
    y = Y[:, 2]
    folds = kfold_split(40, 4, seed=1)
    budget = TuningBudget(3, 6)
    res = tune("krr", X, y, folds, bo_seed=10, cv_seed=11, budget=budget)
    default_mse = cv_mse("krr", X, y, default_hyperparams("krr"), folds, seed=11)
    assert res.cvmse <= default_mse + 1e-15
    assert res.n_probes == 6
    assert set(res.raw) == {"alpha", "gamma"}
    assert res.hyperparams["alpha"] > 0


def test_tune_result_cvmse_is_reproducible():
    X, Y = make_engine_data(30, seed=4)
    y = Y[:, 0]
    folds = kfold_split(30, 3, seed=2)
    res = tune("rpr", X, y, folds, bo_seed=1, cv_seed=2, budget=TuningBudget(2, 4))
    check = cv_mse("rpr", X, y, res.hyperparams, folds, seed=2)
    assert check == pytest.approx(res.cvmse, rel=1e-12)
