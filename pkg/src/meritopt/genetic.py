"""Real-coded genetic maximizer on the unit cube.

Population work is vectorized: one fitness call per generation on the whole
population, tournament selection by index matrix, blend (BLX-alpha) crossover,
per-gene Gaussian mutation, and a small elite carried over unchanged. The best
individual ever seen is tracked independently of the current population.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design_space import _plain_lhs
from .errors import ValidationError
from .seeding import rng_for


@dataclass(frozen=True)
class GAConfig:
    population: int = 100
    generations: int = 100
    tournament: int = 3
    crossover_rate: float = 0.9
    blend_alpha: float = 0.5
    mutation_rate: float = 1.0 / 9.0
    mutation_sigma: float = 0.05
    elitism: int = 2

    def __post_init__(self):
        if self.population < 3:
            raise ValidationError(f"population must be >= 3, got {self.population}")
        if self.generations < 1:
            raise ValidationError(f"generations must be >= 1, got {self.generations}")
        if not 1 <= self.tournament <= self.population:
            raise ValidationError(
                f"tournament must be in [1, population], got {self.tournament}"
            )
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValidationError(f"crossover_rate must be in [0, 1], got {self.crossover_rate}")
        if self.blend_alpha < 0.0:
            raise ValidationError(f"blend_alpha must be >= 0, got {self.blend_alpha}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValidationError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if self.mutation_sigma <= 0.0:
            raise ValidationError(f"mutation_sigma must be > 0, got {self.mutation_sigma}")
        if not 0 <= self.elitism < self.population:
            raise ValidationError(
                f"elitism must be in [0, population), got {self.elitism}"
            )


@dataclass
class GAResult:
    best: np.ndarray
    best_fitness: float
    history: np.ndarray  # best fitness after init and after each generation


def optimize(fitness, dims: int, config: GAConfig, seed: int) -> GAResult:
    """Maximize ``fitness`` over the ``dims``-dimensional unit cube.

    ``fitness`` receives an (m, dims) array and must return m finite-or--inf
    values; it is called once per generation plus once for the initial
    population.
    """
    if dims < 1:
        raise ValidationError(f"dims must be >= 1, got {dims}")
    rng = rng_for(seed)
    pop = _plain_lhs(config.population, dims, rng)

    def evaluate(P: np.ndarray) -> np.ndarray:
        out = np.asarray(fitness(P), dtype=float)
        if out.shape != (len(P),):
            raise ValidationError(
                f"fitness must return shape ({len(P)},), got {out.shape}"
            )
        if np.any(np.isnan(out)):
            raise ValidationError("fitness returned NaN")
        return out

    fit = evaluate(pop)
    best_idx = int(np.argmax(fit))
    best = pop[best_idx].copy()
    best_fitness = float(fit[best_idx])
    history = [best_fitness]

    n_children = config.population - config.elitism
    n_pairs = (n_children + 1) // 2
    for _ in range(config.generations):
        elites = pop[np.argsort(fit)[::-1][: config.elitism]].copy()

        entrants = rng.integers(0, config.population, size=(2 * n_pairs, config.tournament))
        winners = entrants[np.arange(2 * n_pairs), np.argmax(fit[entrants], axis=1)]
        pa = pop[winners[:n_pairs]]
        pb = pop[winners[n_pairs:]]

        lo = np.minimum(pa, pb)
        span = np.abs(pa - pb)
        low = lo - config.blend_alpha * span
        width = (1.0 + 2.0 * config.blend_alpha) * span
        c1 = low + rng.random(pa.shape) * width
        c2 = low + rng.random(pa.shape) * width
        crossed = rng.random(n_pairs) < config.crossover_rate
        c1 = np.where(crossed[:, None], c1, pa)
        c2 = np.where(crossed[:, None], c2, pb)
        children = np.vstack([c1, c2])[:n_children]

        mutated = rng.random(children.shape) < config.mutation_rate
        children = children + mutated * rng.normal(
            0.0, config.mutation_sigma, children.shape
        )
        np.clip(children, 0.0, 1.0, out=children)

        pop = np.vstack([elites, children])
        fit = evaluate(pop)
        gen_best = int(np.argmax(fit))
        if fit[gen_best] > best_fitness:
            best_fitness = float(fit[gen_best])
            best = pop[gen_best].copy()
        history.append(best_fitness)

    return GAResult(best=best, best_fitness=best_fitness, history=np.array(history))
