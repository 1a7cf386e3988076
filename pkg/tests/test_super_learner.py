"""Stacking machinery: folds, CV scoring, weight fitting, full ensembles."""

import numpy as np
import pytest

from meritopt.design_space import DesignSpace, denormalize
from meritopt.errors import ValidationError
from meritopt.evaluators import VirtualEngine
from meritopt.learners import KINDS, train
from meritopt.merit import TARGETS, MeritConstants, merit_formula
from meritopt.super_learner import (
    Ensemble,
    SuperLearner,
    cv_mse,
    fit_stack_weights,
    kfold_split,
    nnls,
    oof_predictions,
    train_super_learner,
)
from conftest import cheap_hyperparams, cheap_table, make_engine_data


# -- kfold_split ----------------------------------------------------------------


def test_kfold_even_split_sizes():
    folds = kfold_split(150, 10, seed=0)
    assert len(folds) == 10
    assert all(len(te) == 15 for _, te in folds)


def test_kfold_uneven_split_sizes():
    folds = kfold_split(153, 10, seed=0)
    sizes = [len(te) for _, te in folds]
    assert sizes == [16, 16, 16, 15, 15, 15, 15, 15, 15, 15]


def test_kfold_is_a_partition_with_complementary_train_sets():
    n, k = 47, 5
    folds = kfold_split(n, k, seed=3)
    all_test = np.concatenate([te for _, te in folds])
    assert sorted(all_test.tolist()) == list(range(n))
    for tr, te in folds:
        assert len(np.intersect1d(tr, te)) == 0
        assert len(tr) + len(te) == n


def test_kfold_determinism_and_seed_sensitivity():
    a = kfold_split(30, 3, seed=1)
    b = kfold_split(30, 3, seed=1)
    c = kfold_split(30, 3, seed=2)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    assert any(not np.array_equal(x[1], y[1]) for x, y in zip(a, c))


def test_kfold_validates_k():
    with pytest.raises(ValidationError):
        kfold_split(10, 1, seed=0)
    with pytest.raises(ValidationError):
        kfold_split(10, 11, seed=0)


# -- cv_mse ----------------------------------------------------------------------


def test_cv_mse_zero_on_constant_targets():
    rng = np.random.default_rng(0)
    X = rng.random((24, 4))
    y = np.full(24, 3.5)
    folds = kfold_split(24, 4, seed=1)
    hp = cheap_hyperparams()
    # The closed-form and tree learners hit a constant exactly; the iterative
    # network only approaches it (limited by finite gradient steps).
    for kind, tol in (("rpr", 0.0), ("krr", 0.0), ("gbt", 0.0), ("svr", 1e-12), ("mlp", 0.2)):
        assert cv_mse(kind, X, y, hp[kind], folds, seed=2) <= tol


def test_cv_mse_is_mean_of_per_fold_mses():
    X, Y = make_engine_data(30, seed=5)
    y = Y[:, 0]
    folds = kfold_split(30, 3, seed=4)
    hp = cheap_hyperparams()["krr"]
    # Independent recomputation straight from the definition.
    from meritopt.seeding import child_seed

    per_fold = []
    for f_idx, (tr, te) in enumerate(folds):
        model = train("krr", X[tr], y[tr], hp, seed=child_seed(7, f_idx))
        per_fold.append(np.mean((model.predict(X[te]) - y[te]) ** 2))
    assert cv_mse("krr", X, y, hp, folds, seed=7) == pytest.approx(
        np.mean(per_fold), abs=1e-15
    )


def test_cv_mse_determinism():
    X, Y = make_engine_data(25, seed=6)
    folds = kfold_split(25, 5, seed=0)
    hp = cheap_hyperparams()["mlp"]
    assert cv_mse("mlp", X, Y[:, 2], hp, folds, seed=9) == cv_mse(
        "mlp", X, Y[:, 2], hp, folds, seed=9
    )


def test_fold_hygiene_poisoned_target_leaves_own_oof_unchanged():
    X, Y = make_engine_data(30, seed=8)
    y = Y[:, 1].copy()
    folds = kfold_split(30, 5, seed=2)
    for kind in ("rpr", "krr"):
        hp = cheap_hyperparams()[kind]
        clean, _ = oof_predictions(kind, X, y, hp, folds, seed=11)
        poisoned_y = y.copy()
        poisoned_y[17] += 1000.0
        dirty, _ = oof_predictions(kind, X, poisoned_y, hp, folds, seed=11)
        assert dirty[17] == clean[17]
        assert np.max(np.abs(dirty - clean)) > 1.0  # other rows did change


# -- nnls -------------------------------------------------------------------------


def test_nnls_identity_system():
    x = nnls(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(x, [1.0, 2.0, 3.0], atol=1e-12)


def test_nnls_clips_negative_solution_to_zero():
    a = np.array([[1.0], [2.0], [3.0]])
    b = -np.array([1.0, 2.0, 3.0])
    x = nnls(a, b)
    assert x.shape == (1,) and x[0] == 0.0


def test_nnls_satisfies_kkt_on_random_problems():
    for trial in range(20):
        rng = np.random.default_rng(trial)
        A = rng.standard_normal((20, 4))
        b = rng.standard_normal(20)
        x = nnls(A, b)
        assert np.all(x >= 0)
        grad = A.T @ (A @ x - b)
        assert np.all(grad[x > 0] <= 1e-8) and np.all(grad[x > 0] >= -1e-8)
        assert np.all(grad[x == 0] >= -1e-8)


def test_nnls_rejects_bad_input():
    with pytest.raises(ValidationError):
        nnls(np.array([[np.inf, 1.0]]), np.array([1.0]))
    with pytest.raises(ValidationError):
        nnls(np.eye(3), np.ones(4))


# -- fit_stack_weights -------------------------------------------------------------


def test_stack_weights_pick_the_exact_column():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(50)
    M = np.column_stack([y, rng.standard_normal(50)])
    w = fit_stack_weights(M, y)
    assert np.allclose(w, [1.0, 0.0], atol=1e-6)


def test_stack_weights_zero_on_strictly_worsening_column():
    rng = np.random.default_rng(2)
    y = rng.standard_normal(40)
    M = np.column_stack([y, -y])
    w = fit_stack_weights(M, y)
    assert w[0] == 1.0 and w[1] == 0.0


def test_stack_weights_single_column_is_unit():
    y = np.linspace(1.0, 4.0, 12)
    w = fit_stack_weights((y / 2.0)[:, None], y)
    assert w.shape == (1,) and w[0] == pytest.approx(1.0, abs=1e-12)


def test_stack_weights_form_a_convex_combination():
    for trial in range(30):
        rng = np.random.default_rng(100 + trial)
        M = rng.standard_normal((25, 5))
        y = rng.standard_normal(25)
        w = fit_stack_weights(M, y)
        assert np.all(w >= 0.0)
        assert w.sum() == pytest.approx(1.0, abs=1e-9)


def test_stack_weights_dominate_every_single_column():
    for trial in range(30):
        rng = np.random.default_rng(200 + trial)
        M = rng.standard_normal((30, 5)) + rng.uniform(-1, 1, size=5)
        y = rng.standard_normal(30)
        w = fit_stack_weights(M, y)
        stacked = np.sum((M @ w - y) ** 2)
        best_single = min(np.sum((M[:, j] - y) ** 2) for j in range(5))
        assert stacked <= best_single + 1e-10


def test_stack_weights_interpolate_complementary_halves():
    # Two columns that each carry half the signal: the optimum mixes them.
    rng = np.random.default_rng(3)
    a = rng.standard_normal(60)
    b = rng.standard_normal(60)
    y = a + b
    w = fit_stack_weights(np.column_stack([2 * a, 2 * b]), y)
    assert w[0] == pytest.approx(0.5, abs=1e-8)
    assert w[1] == pytest.approx(0.5, abs=1e-8)


def test_stack_weights_validate_shapes():
    with pytest.raises(ValidationError):
        fit_stack_weights(np.ones((5, 2)), np.ones(4))


# -- train_super_learner ------------------------------------------------------------


def _linear_targets(n=60, seed=4):
    rng = np.random.default_rng(seed)
    space = DesignSpace()
    U = rng.random((n, len(space)))
    from meritopt.design_space import denormalize_batch

    X = denormalize_batch(space, U)
    coefs = rng.standard_normal((len(space), len(TARGETS)))
    Y = X @ coefs + rng.standard_normal(len(TARGETS))
    return X, Y


def test_super_learner_concentrates_on_polynomial_for_linear_targets():
    X, Y = _linear_targets()
    # Degree 1 keeps the monomial count below the fold-train row count so the
    # ridge fit of an exactly linear target is determined, hence near-exact.
    table = cheap_table()
    for target in TARGETS:
        table[target]["rpr"] = {"alpha": 1e-6, "degree": 1}
    model = train_super_learner(X, Y, table, seed=5, k=5)
    rpr_idx = KINDS.index("rpr")
    for target in TARGETS:
        ens = model.ensembles[target]
        assert ens.weights[rpr_idx] >= 0.99
        assert ens.stacked_oof_mse < 1e-6


def test_super_learner_stacked_oof_never_worse_than_best_learner():
    X, Y = make_engine_data(60, seed=9)
    model = train_super_learner(X, Y, cheap_table(), seed=6, k=5)
    for target in TARGETS:
        ens = model.ensembles[target]
        assert ens.stacked_oof_mse <= np.min(ens.learner_oof_mse) + 1e-10


def test_super_learner_determinism():
    X, Y = make_engine_data(40, seed=10)
    a = train_super_learner(X, Y, cheap_table(), seed=7, k=4)
    b = train_super_learner(X, Y, cheap_table(), seed=7, k=4)
    for target in TARGETS:
        assert np.array_equal(a.ensembles[target].weights, b.ensembles[target].weights)
    Xq = make_engine_data(5, seed=11)[0]
    assert np.array_equal(a.predict_objectives(Xq), b.predict_objectives(Xq))


def test_super_learner_validates_shapes():
    X, Y = make_engine_data(20, seed=12)
    with pytest.raises(ValidationError):
        train_super_learner(X, Y[:, :3], cheap_table(), seed=0, k=4)


# -- predict_merit ---------------------------------------------------------------


class _ConstModel:
    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), self.value)


def _single_model_learner(values_by_target):
    ensembles = {
        t: Ensemble(
            target=t,
            models=(_ConstModel(v),),
            weights=np.array([1.0]),
            stacked_oof_mse=0.0,
            learner_oof_mse=np.zeros(1),
        )
        for t, v in values_by_target.items()
    }
    return SuperLearner(ensembles)


def test_predict_merit_clamps_negative_emissions_and_mprr():
    constants = MeritConstants()
    model = _single_model_learner(
        {"isfc": 160.0, "m_soot": -0.5, "m_nox": -2.0, "mprr": -1.0, "pmax": 150.0}
    )
    out = model.predict_merit(np.zeros((1, 9)), constants)
    expected = merit_formula(160.0, 0.0, 0.0, 0.0, 150.0, constants)
    assert out[0] == pytest.approx(expected, abs=1e-12)


def test_predict_merit_nonpositive_isfc_repels():
    model = _single_model_learner(
        {"isfc": -3.0, "m_soot": 0.0, "m_nox": 0.0, "mprr": 0.0, "pmax": 150.0}
    )
    out = model.predict_merit(np.zeros((2, 9)), MeritConstants())
    assert np.all(out == -np.inf)


class _OracleModel:
    """Exact virtual-engine output for one target index."""

    def __init__(self, space, t_idx):
        self.space = space
        self.t_idx = t_idx

    def predict(self, X):
        U = (np.atleast_2d(X) - self.space._lower) / self.space._span
        return VirtualEngine.outputs(U)[self.t_idx]


def test_predict_merit_with_oracle_models_equals_true_merit(space, engine):
    ensembles = {
        t: Ensemble(
            target=t,
            models=(_OracleModel(space, i),),
            weights=np.array([1.0]),
            stacked_oof_mse=0.0,
            learner_oof_mse=np.zeros(1),
        )
        for i, t in enumerate(TARGETS)
    }
    model = SuperLearner(ensembles)
    constants = MeritConstants()
    rng = np.random.default_rng(13)
    for _ in range(20):
        p = denormalize(space, rng.random(9))
        X = p.as_array()
        sample_merit = engine.merit_of_normalized(
            (X - space._lower) / space._span, constants
        )
        assert model.predict_merit(X, constants)[0] == pytest.approx(
            float(sample_merit[0]), abs=1e-10
        )
