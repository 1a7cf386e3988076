"""Real-coded GA: convergence on analytic optima, determinism, config checks."""

import numpy as np
import pytest

from meritopt.errors import ValidationError
from meritopt.genetic import GAConfig, optimize


def sphere(P):
    return -np.sum((P - 0.5) ** 2, axis=1)


def test_finds_sphere_optimum():
    result = optimize(sphere, dims=9, config=GAConfig(), seed=0)
    assert np.max(np.abs(result.best - 0.5)) < 1e-2
    assert result.best_fitness <= 0.0


def test_determinism():
    config = GAConfig(population=30, generations=15)
    a = optimize(sphere, 5, config, seed=3)
    b = optimize(sphere, 5, config, seed=3)
    assert np.array_equal(a.best, b.best)
    assert a.best_fitness == b.best_fitness
    assert np.array_equal(a.history, b.history)


def test_history_is_nondecreasing_and_sized():
    result = optimize(sphere, 4, GAConfig(population=20, generations=25), seed=1)
    assert len(result.history) == 26
    assert np.all(np.diff(result.history) >= 0)
    assert result.history[-1] == result.best_fitness


def test_all_evaluated_points_stay_in_unit_cube():
    seen = []

    def recording(P):
        seen.append(P.copy())
        return sphere(P)

    optimize(recording, 3, GAConfig(population=15, generations=10), seed=2)
    allp = np.vstack(seen)
    assert np.all(allp >= 0.0) and np.all(allp <= 1.0)


def test_corner_optimum_is_reachable():
    result = optimize(
        lambda P: P.sum(axis=1), 4, GAConfig(population=40, generations=40), seed=4
    )
    assert np.min(result.best) > 0.97


def test_fitness_shape_and_nan_are_rejected():
    cfg = GAConfig(population=10, generations=2)
    with pytest.raises(ValidationError, match="shape"):
        optimize(lambda P: np.zeros(3), 2, cfg, seed=0)
    with pytest.raises(ValidationError, match="NaN"):
        optimize(lambda P: np.full(len(P), np.nan), 2, cfg, seed=0)


def test_neg_inf_fitness_is_tolerated():
    def partial(P):
        out = sphere(P)
        out[P[:, 0] > 0.6] = -np.inf
        return out

    result = optimize(partial, 3, GAConfig(population=30, generations=20), seed=5)
    assert np.isfinite(result.best_fitness)
    assert result.best[0] <= 0.6


def test_config_validation():
    for bad in (
        dict(population=2),
        dict(generations=0),
        dict(tournament=0),
        dict(population=10, tournament=11),
        dict(crossover_rate=1.5),
        dict(blend_alpha=-0.1),
        dict(mutation_rate=-0.2),
        dict(mutation_sigma=0.0),
        dict(population=10, elitism=10),
    ):
        with pytest.raises(ValidationError):
            GAConfig(**bad)


def test_dims_validation():
    with pytest.raises(ValidationError):
        optimize(sphere, 0, GAConfig(population=5, generations=1), seed=0)
