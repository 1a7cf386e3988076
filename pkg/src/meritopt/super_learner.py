"""Stacked ensembles: five base learners combined per target by convex stacking.

For each output target the five base learners are cross-validated on a shared
k-fold split, their out-of-fold predictions form the columns of a stacking
matrix, and the combination weights are the convex (nonnegative, sum-to-one)
least-squares fit of those columns to the target. Deployment models are refit
on the full data. Because each single learner is a feasible stacking solution
(a unit weight vector), the stacked out-of-fold MSE can never exceed the best
single learner's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls as _scipy_nnls

from .errors import ValidationError
from .learners import KINDS, default_hyperparams, train
from .merit import TARGETS, MeritConstants, merit_formula
from .seeding import child_seed


def kfold_split(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold partition of range(n) as (train_idx, test_idx) pairs.

    The first n % k folds receive one extra sample; the shuffle is a single
    seeded permutation so the split is reproducible and shareable.
    """
    if k < 2 or k > n:
        raise ValidationError(f"need 2 <= k <= n, got k={k}, n={n}")
    from .seeding import rng_for

    perm = rng_for(seed).permutation(n)
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    folds = []
    stop = 0
    for size in sizes:
        test = perm[stop : stop + size]
        train_idx = np.concatenate([perm[:stop], perm[stop + size :]])
        folds.append((train_idx, test))
        stop += size
    return folds


def oof_predictions(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    hp: dict,
    folds: list[tuple[np.ndarray, np.ndarray]],
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold predictions and per-fold test MSEs for one learner."""
    oof = np.empty(len(y))
    fold_mse = np.empty(len(folds))
    for f_idx, (tr, te) in enumerate(folds):
        model = train(kind, X[tr], y[tr], hp, seed=child_seed(seed, f_idx))
        pred = model.predict(X[te])
        oof[te] = pred
        fold_mse[f_idx] = float(np.mean((pred - y[te]) ** 2))
    return oof, fold_mse


def cv_mse(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    hp: dict,
    folds: list[tuple[np.ndarray, np.ndarray]],
    seed: int,
) -> float:
    """Mean of the per-fold test MSEs (the tuning objective)."""
    return float(np.mean(oof_predictions(kind, X, y, hp, folds, seed)[1]))


def default_hyperparameter_table() -> dict[str, dict[str, dict]]:
    """Schema defaults for every (target, learner) cell."""
    return {t: {kind: default_hyperparams(kind) for kind in KINDS} for t in TARGETS}


@dataclass
class Ensemble:
    """Stacked model for a single target."""

    target: str
    models: tuple
    weights: np.ndarray
    stacked_oof_mse: float
    learner_oof_mse: np.ndarray  # per learner, KINDS order

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(len(X))
        for w, model in zip(self.weights, self.models):
            if w != 0.0:
                out += w * model.predict(X)
        return out


@dataclass
class SuperLearner:
    """One stacked ensemble per output target, plus merit prediction."""

    ensembles: dict[str, Ensemble]

    def predict_objectives(self, X: np.ndarray) -> np.ndarray:
        """(m, 5) predictions in canonical target order."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((len(X), len(TARGETS)))
        for t_idx, t in enumerate(TARGETS):
            out[:, t_idx] = self.ensembles[t].predict(X)
        return out

    def predict_merit(self, X: np.ndarray, constants: MeritConstants) -> np.ndarray:
        """Merit of predicted objectives.

        Predicted soot, NOx and pressure-rise rate are clamped at zero since
        the surrogates can dip below physical range; a nonpositive predicted
        ISFC yields -inf so the optimizer never favors such a region.
        """
        obj = self.predict_objectives(X)
        isfc = obj[:, 0]
        m_soot = np.maximum(obj[:, 1], 0.0)
        m_nox = np.maximum(obj[:, 2], 0.0)
        mprr = np.maximum(obj[:, 3], 0.0)
        pmax = obj[:, 4]
        return np.asarray(
            merit_formula(isfc, m_soot, m_nox, mprr, pmax, constants), dtype=float
        )


def nnls(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nonnegative least squares: minimize ||A x - b||_2 subject to x >= 0.

    Validating wrapper over the Lawson-Hanson active-set solver. At the
    returned optimum the KKT conditions hold: the gradient of the squared
    residual is zero on coordinates with x > 0 and nonnegative elsewhere.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or len(A) != len(b):
        raise ValidationError(f"need (n, m) matrix and n vector, got {A.shape} and {b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValidationError("nnls requires finite inputs")
    x, _ = _scipy_nnls(A, b)
    return x


def fit_stack_weights(oof_matrix: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Convex-combination stacking weights over out-of-fold prediction columns.

    Minimizes ||oof_matrix @ w - y||^2 subject to w >= 0 and sum(w) == 1,
    solved exactly by active-set enumeration: every nonempty column subset
    gets an equality-constrained least-squares solve, candidates with a
    negative weight are discarded, and the lowest-residual survivor wins.
    Five columns means 31 tiny solves, so exactness is cheap.

    The sum-to-one constraint keeps the stacked prediction on the same scale
    as its columns. An unconstrained nonnegative fit shrinks the weight sum
    below 1 whenever column errors correlate with the columns themselves,
    biasing every downstream prediction toward zero; near a constraint
    boundary that bias is enough to push optimizer proposals onto the wrong
    side. Unit weight vectors stay feasible, so the stacked residual still
    never exceeds the best single column's.
    """
    M = np.asarray(oof_matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.ndim != 2 or y.ndim != 1 or len(M) != len(y):
        raise ValidationError(f"need (n, m) matrix and n vector, got {M.shape} and {y.shape}")
    m = M.shape[1]
    gram = M.T @ M
    proj = M.T @ y
    best_w = None
    best_res = np.inf
    for mask in range(1, 1 << m):
        idx = [j for j in range(m) if mask >> j & 1]
        s = len(idx)
        kkt = np.empty((s + 1, s + 1))
        kkt[:s, :s] = gram[np.ix_(idx, idx)]
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        kkt[s, s] = 0.0
        rhs = np.append(proj[idx], 1.0)
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            continue
        w_sub = sol[:s]
        if not np.all(np.isfinite(w_sub)) or np.any(w_sub < -1e-12):
            continue
        w = np.zeros(m)
        w[idx] = np.maximum(w_sub, 0.0)
        w /= w.sum()
        res = float(np.sum((M @ w - y) ** 2))
        if res < best_res:
            best_res = res
            best_w = w
    return best_w


def train_super_learner(
    X: np.ndarray,
    Y: np.ndarray,
    hyperparams: dict[str, dict[str, dict]],
    seed: int,
    k: int = 10,
) -> SuperLearner:
    """Train the full five-target stacked surrogate.

    Parameters
    ----------
    X : (n, 9) design matrix in engineering units.
    Y : (n, 5) target matrix in canonical target order.
    hyperparams : per-target, per-learner hyperparameter dicts (decoded).
    seed : root seed; fold split and every learner fit derive children of it.
    k : number of cross-validation folds for the stacking matrix.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or Y.shape != (len(X), len(TARGETS)):
        raise ValidationError(
            f"need X (n, d) and Y (n, {len(TARGETS)}), got {X.shape} and {Y.shape}"
        )
    n = len(X)
    folds = kfold_split(n, k, child_seed(seed, 0))
    ensembles = {}
    for t_idx, target in enumerate(TARGETS):
        y = Y[:, t_idx]
        oof_matrix = np.empty((n, len(KINDS)))
        learner_mse = np.empty(len(KINDS))
        models = []
        for k_idx, kind in enumerate(KINDS):
            hp = hyperparams[target][kind]
            learner_seed = child_seed(seed, 1 + k_idx, t_idx)
            oof, fold_mse = oof_predictions(kind, X, y, hp, folds, learner_seed)
            oof_matrix[:, k_idx] = oof
            learner_mse[k_idx] = float(np.mean(fold_mse))
            # Deployment fit on all rows; fold fits used seeds 0..k-1.
            models.append(train(kind, X, y, hp, seed=child_seed(learner_seed, k)))
        weights = fit_stack_weights(oof_matrix, y)
        stacked = float(np.mean((oof_matrix @ weights - y) ** 2))
        ensembles[target] = Ensemble(
            target, tuple(models), weights, stacked, learner_mse
        )
    return SuperLearner(ensembles)
