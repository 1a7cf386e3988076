"""Bayesian hyperparameter search with a Matern-5/2 Gaussian process.

Each learner's raw hyperparameter box is searched by maximizing an upper
confidence bound (kappa = 2.576, the two-sided 99% normal quantile) of a GP
fit to the score -log10(CVMSE) of the probes so far. Probes start from a
small Latin hypercube, the GP's length scale and signal variance come from a
marginal-likelihood grid, and failed fits are kept in the GP at the worst
observed score so the search is pushed away from unstable regions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .design_space import _plain_lhs
from .errors import TrainingError, ValidationError
from .learners import (
    KINDS,
    HYPERPARAMETER_SCHEMA,
    decode_hyperparams,
    default_raw,
    raw_bounds,
)
from .merit import TARGETS
from .seeding import child_seed, rng_for
from .super_learner import cv_mse, kfold_split

_KAPPA = 2.576
_N_CANDIDATES = 2048
_N_LOCAL = 256
_LOCAL_SIGMA = 0.05
_DUPLICATE_TOL = 1e-6
_LENGTH_GRID = (0.1, 0.3, 1.0)
_VARIANCE_GRID = (0.5, 1.0, 2.0)
_TINY_MSE = 1e-300


@dataclass(frozen=True)
class TuningBudget:
    """Probe counts: ``n_initial`` space-filling fits, then GP-guided ones."""

    n_initial: int = 10
    n_total: int = 40

    def __post_init__(self):
        if self.n_initial < 2 or self.n_total < self.n_initial:
            raise ValidationError(
                f"need n_total >= n_initial >= 2, got {self!r}"
            )


def matern52(A: np.ndarray, B: np.ndarray, length: float, var: float) -> np.ndarray:
    r = cdist(A, B) / length
    s = np.sqrt(5.0) * r
    return var * (1.0 + s + s * s / 3.0) * np.exp(-s)


@dataclass(frozen=True)
class GaussianProcess:
    """Fitted zero-mean GP: kernel settings plus the cached Cholesky solve."""

    x: np.ndarray
    length: float
    var: float
    noise: float
    cho: tuple
    alpha: np.ndarray

    def posterior(self, cands: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at candidate rows."""
        Kc = matern52(self.x, cands, self.length, self.var)
        mu = Kc.T @ self.alpha
        v = cho_solve(self.cho, Kc)
        sigma2 = np.maximum(self.var - np.sum(Kc * v, axis=0), 0.0)
        return mu, np.sqrt(sigma2)


def fit_gp(Xn: np.ndarray, z: np.ndarray) -> GaussianProcess | None:
    """Grid-select (length, variance) by log marginal likelihood.

    Returns None if every factorization failed. The noise floor starts at
    1e-6 and escalates tenfold on failure.
    """
    Xn = np.asarray(Xn, dtype=float)
    z = np.asarray(z, dtype=float)
    m = len(z)
    best = None
    best_lml = -np.inf
    for length in _LENGTH_GRID:
        for var in _VARIANCE_GRID:
            K = matern52(Xn, Xn, length, var)
            noise = 1e-6
            while noise <= 1e-2:
                try:
                    cho = cho_factor(K + noise * np.eye(m), lower=True)
                except np.linalg.LinAlgError:
                    noise *= 10.0
                    continue
                alpha = cho_solve(cho, z)
                logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
                lml = -0.5 * (z @ alpha) - 0.5 * logdet - 0.5 * m * np.log(2 * np.pi)
                if lml > best_lml:
                    best_lml = lml
                    best = GaussianProcess(
                        x=Xn, length=length, var=var, noise=noise, cho=cho, alpha=alpha
                    )
                break
    return best


def _maximize(score_fn, bounds, budget: TuningBudget, seed: int, first_probes=()):
    """Shared UCB loop. ``score_fn`` may raise TrainingError to mark a failure.

    ``first_probes`` are raw vectors evaluated before the space-filling phase
    (warm starts); they count toward the total budget. Returns
    (raw_points, scores) where scores holds None for failed probes.
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
        raise ValidationError(f"invalid search bounds {bounds}")
    d = len(bounds)
    span = hi - lo
    rng = rng_for(seed)

    raw_points: list[np.ndarray] = []
    scores: list[float | None] = []

    def probe(vec: np.ndarray):
        raw_points.append(vec)
        try:
            scores.append(float(score_fn(vec)))
        except TrainingError:
            scores.append(None)

    for vec in first_probes:
        if len(raw_points) < budget.n_total:
            probe(np.asarray(vec, dtype=float))
    for row in _plain_lhs(budget.n_initial, d, rng):
        if len(raw_points) < budget.n_total:
            probe(lo + span * row)

    while len(raw_points) < budget.n_total:
        ok = [s for s in scores if s is not None]
        if not ok:
            probe(lo + span * rng.random(d))
            continue
        worst = min(ok)
        filled = np.array([worst if s is None else s for s in scores])
        mean = filled.mean()
        std = filled.std()
        z = (filled - mean) / (std if std > 0 else 1.0)
        Xn = (np.array(raw_points) - lo) / span
        gp = fit_gp(Xn, z)
        if gp is None:
            probe(lo + span * rng.random(d))
            continue
        best_n = Xn[int(np.argmax(filled))]
        local = np.clip(
            best_n + _LOCAL_SIGMA * rng.standard_normal((_N_LOCAL, d)), 0.0, 1.0
        )
        cands = np.vstack([rng.random((_N_CANDIDATES, d)), local])
        mu, sigma = gp.posterior(cands)
        ucb = mu + _KAPPA * sigma
        for idx in np.argsort(ucb)[::-1]:
            cand = cands[idx]
            if np.min(np.max(np.abs(Xn - cand), axis=1)) > _DUPLICATE_TOL:
                probe(lo + span * cand)
                break
        else:
            probe(lo + span * rng.random(d))
    return raw_points, scores


def bo_minimize(f, bounds, budget: TuningBudget | None = None, seed: int = 0):
    """Minimize a scalar function over a box via the UCB search.

    Returns (x_best, f_best). ``f`` may raise TrainingError for infeasible
    points; if every probe fails, TrainingError is raised.
    """
    budget = budget or TuningBudget()
    raw_points, scores = _maximize(lambda v: -f(v), bounds, budget, seed)
    pairs = [(s, i) for i, s in enumerate(scores) if s is not None]
    if not pairs:
        raise TrainingError("every probe of the objective failed")
    best_score, best_idx = max(pairs)
    return raw_points[best_idx], -best_score


@dataclass
class TuneResult:
    """Outcome of one (target, learner) tuning cell."""

    kind: str
    raw: dict[str, float]
    hyperparams: dict
    cvmse: float
    n_probes: int
    n_failures: int
    default_cvmse: float | None = None


def tune(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    folds,
    bo_seed: int,
    cv_seed: int,
    budget: TuningBudget | None = None,
) -> TuneResult:
    """Search one learner's raw hyperparameter box for minimum CVMSE.

    The fold split and the learner seed are held fixed across probes so that
    score differences reflect the hyperparameters alone.
    """
    budget = budget or TuningBudget()
    schema = HYPERPARAMETER_SCHEMA[kind]
    names = [spec.name for spec in schema]
    lo, hi = raw_bounds(kind)
    mse_by_key: dict[bytes, float] = {}

    def score_fn(vec: np.ndarray) -> float:
        hp = decode_hyperparams(kind, vec)
        mse = cv_mse(kind, X, y, hp, folds, cv_seed)
        if not np.isfinite(mse):
            raise TrainingError(f"{kind}: non-finite CVMSE at {hp}")
        mse_by_key[vec.tobytes()] = mse
        return -np.log10(max(mse, _TINY_MSE))

    # The schema defaults are probed first, so the tuned result can never be
    # worse than the defaults on the same folds and seed.
    raw_points, scores = _maximize(
        score_fn, list(zip(lo, hi)), budget, bo_seed, first_probes=[default_raw(kind)]
    )
    pairs = [(s, i) for i, s in enumerate(scores) if s is not None]
    if not pairs:
        raise TrainingError(f"{kind}: every tuning probe failed")
    _, best_idx = max(pairs)
    best_vec = raw_points[best_idx]
    return TuneResult(
        kind=kind,
        raw={name: float(v) for name, v in zip(names, best_vec)},
        hyperparams=decode_hyperparams(kind, best_vec),
        cvmse=mse_by_key[best_vec.tobytes()],
        n_probes=len(raw_points),
        n_failures=sum(1 for s in scores if s is None),
    )


def tune_all(
    X: np.ndarray,
    Y: np.ndarray,
    seed: int,
    budget: TuningBudget | None = None,
    k: int = 10,
    with_defaults: bool = True,
) -> dict[str, dict[str, TuneResult]]:
    """Tune every (target, learner) cell on one shared fold split.

    With ``with_defaults`` each result also carries the CVMSE of the schema
    defaults on the same folds, for before/after diagnostics.
    """
    from .learners import default_hyperparams

    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    budget = budget or TuningBudget()
    folds = kfold_split(len(X), k, child_seed(seed, 0))
    results: dict[str, dict[str, TuneResult]] = {}
    cell = 0
    for t_idx, target in enumerate(TARGETS):
        y = Y[:, t_idx]
        results[target] = {}
        for kind in KINDS:
            res = tune(
                kind,
                X,
                y,
                folds,
                bo_seed=child_seed(seed, 1, cell),
                cv_seed=child_seed(seed, 2, cell),
                budget=budget,
            )
            if with_defaults:
                res.default_cvmse = cv_mse(
                    kind,
                    X,
                    y,
                    default_hyperparams(kind),
                    folds,
                    child_seed(seed, 2, cell),
                )
            results[target][kind] = res
            cell += 1
    return results


def hyperparameter_table(
    results: dict[str, dict[str, TuneResult]],
) -> dict[str, dict[str, dict]]:
    """Decoded hyperparameters per (target, learner), ready for training."""
    return {
        target: {kind: res.hyperparams for kind, res in by_kind.items()}
        for target, by_kind in results.items()
    }
