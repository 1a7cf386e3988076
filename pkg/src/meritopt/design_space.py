"""Design-variable space: bounds, unit-cube transforms, and space-filling sampling.

The nine engine design variables are held in a fixed order. All optimization
internals work on the normalized unit cube; decoding back to engineering
units happens at the edges (evaluation, persistence, reporting).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .seeding import rng_for

#: (name, lower, upper, integral) in canonical order.
_DEFAULT_VARIABLES = (
    ("nNoz", 8.0, 10.0, True),
    ("TNA", 1.0, 1.3, False),
    ("Pinj", 1400.0, 1800.0, False),
    ("SOI", -11.0, -7.0, False),
    ("NozzleAngle", 72.5, 83.0, False),
    ("EGR", 0.35, 0.5, False),
    ("Tivc", 323.0, 373.0, False),
    ("Pivc", 2.0, 2.3, False),
    ("SR", -2.4, -1.0, False),
)

VARIABLE_NAMES = tuple(v[0] for v in _DEFAULT_VARIABLES)


@dataclass(frozen=True)
class VariableSpec:
    """One design variable: bounds in engineering units, integrality flag."""

    name: str
    lower: float
    upper: float
    integral: bool = False

    def __post_init__(self):
        if not np.isfinite(self.lower) or not np.isfinite(self.upper):
            raise ValidationError(f"{self.name}: bounds must be finite")
        if not self.lower < self.upper:
            raise ValidationError(
                f"{self.name}: lower bound {self.lower} must be < upper {self.upper}"
            )
        if self.integral and (self.lower != int(self.lower) or self.upper != int(self.upper)):
            raise ValidationError(f"{self.name}: integral variable needs integer bounds")


@dataclass(frozen=True)
class DesignPoint:
    """A concrete design in engineering units, canonical variable order."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class DesignSpace:
    """Ordered collection of the nine design variables.

    The variable names, order, and the single integral variable (nNoz) are
    fixed; bounds may be overridden, e.g. from a campaign config.
    """

    def __init__(self, variables: tuple[VariableSpec, ...] | None = None):
        if variables is None:
            variables = tuple(VariableSpec(*v) for v in _DEFAULT_VARIABLES)
        variables = tuple(variables)
        if tuple(v.name for v in variables) != VARIABLE_NAMES:
            raise ValidationError(
                f"design space must contain exactly {list(VARIABLE_NAMES)} in order"
            )
        for spec, (_, _, _, integral) in zip(variables, _DEFAULT_VARIABLES):
            if spec.integral != integral:
                raise ValidationError(f"{spec.name}: integrality flag is fixed")
        self.variables = variables
        self._lower = np.array([v.lower for v in variables])
        self._upper = np.array([v.upper for v in variables])
        self._span = self._upper - self._lower
        self._integral_mask = np.array([v.integral for v in variables])

    def __len__(self) -> int:
        return len(self.variables)

    def __eq__(self, other) -> bool:
        return isinstance(other, DesignSpace) and self.variables == other.variables

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self._lower.copy(), self._upper.copy()

    def with_bounds(self, overrides: dict[str, tuple[float, float]]) -> "DesignSpace":
        """New space with some bounds replaced; unknown names are an error."""
        unknown = set(overrides) - set(VARIABLE_NAMES)
        if unknown:
            raise ValidationError(f"unknown design variables: {sorted(unknown)}")
        specs = []
        for spec in self.variables:
            if spec.name in overrides:
                lo, hi = overrides[spec.name]
                specs.append(VariableSpec(spec.name, lo, hi, spec.integral))
            else:
                specs.append(spec)
        return DesignSpace(tuple(specs))

    def to_dict(self) -> dict:
        return {
            v.name: {"lower": v.lower, "upper": v.upper, "integral": v.integral}
            for v in self.variables
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignSpace":
        # Key order in serialized form is irrelevant; rebuild canonically.
        unknown = set(data) - set(VARIABLE_NAMES)
        if unknown:
            raise ValidationError(f"unknown design variables: {sorted(unknown)}")
        try:
            specs = tuple(
                VariableSpec(
                    name, data[name]["lower"], data[name]["upper"], data[name]["integral"]
                )
                for name in VARIABLE_NAMES
            )
        except KeyError as exc:
            raise ValidationError(f"serialized space is missing {exc}")
        return cls(specs)


def normalize(space: DesignSpace, point: DesignPoint | np.ndarray) -> np.ndarray:
    """Map a design point to the unit cube by per-variable affine transform."""
    x = point.as_array() if isinstance(point, DesignPoint) else np.asarray(point, dtype=float)
    if x.shape[-1] != len(space):
        raise ValidationError(f"expected {len(space)} values, got {x.shape[-1]}")
    return (x - space._lower) / space._span


def denormalize(space: DesignSpace, u: np.ndarray) -> DesignPoint:
    """Map unit-cube coordinates back to engineering units.

    Integral variables are rounded to the nearest integer after the affine
    map and then clamped to their bounds, so any u in [0,1] decodes to a
    valid point.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (len(space),):
        raise ValidationError(f"expected {len(space)} coordinates, got {u.shape}")
    x = space._lower + u * space._span
    x = np.where(space._integral_mask, np.rint(x), x)
    x = np.clip(x, space._lower, space._upper)
    return DesignPoint(tuple(x))


def denormalize_batch(space: DesignSpace, U: np.ndarray) -> np.ndarray:
    """Vectorized decode of an (m, 9) array; returns engineering-unit array."""
    U = np.asarray(U, dtype=float)
    X = space._lower + U * space._span
    X[:, space._integral_mask] = np.rint(X[:, space._integral_mask])
    return np.clip(X, space._lower, space._upper)


def validate(space: DesignSpace, point: DesignPoint) -> list[str]:
    """Return a list of violation messages; empty means the point is valid."""
    x = point.as_array()
    if x.shape != (len(space),):
        raise ValidationError(f"expected {len(space)} values, got {x.shape}")
    problems = []
    for spec, v in zip(space.variables, x):
        if not np.isfinite(v):
            problems.append(f"{spec.name}: value {v} is not finite")
            continue
        if v < spec.lower or v > spec.upper:
            problems.append(f"{spec.name}: {v} outside [{spec.lower}, {spec.upper}]")
        if spec.integral and v != np.rint(v):
            problems.append(f"{spec.name}: {v} is not an integer")
    return problems


def is_valid(space: DesignSpace, point: DesignPoint) -> bool:
    return not validate(space, point)


def _plain_lhs(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """Standard Latin hypercube on the unit cube: one sample per 1/n bin."""
    u = (rng.random((n, dims)) + np.arange(n)[:, None]) / n
    for j in range(dims):
        u[:, j] = u[rng.permutation(n), j]
    return u


def _restratify(u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Force exact marginal stratification, keeping each column's rank order."""
    n, dims = u.shape
    out = np.empty_like(u)
    for j in range(dims):
        ranks = np.argsort(np.argsort(u[:, j]))
        out[:, j] = (ranks + rng.random(n)) / n
    return out


def lhs_mdu_sample(
    space: DesignSpace, n: int, seed: int, candidate_factor: int = 5
) -> list[DesignPoint]:
    """Space-filling sample: Latin hypercube with multidimensional uniformity.

    Draws ``candidate_factor * n`` Latin hypercube candidates, greedily
    eliminates points from the closest pairs until ``n`` remain (maximizing
    the minimum pairwise distance), then re-stratifies each marginal so the
    Latin property holds exactly on the survivors.

    Deterministic for a given seed. Integral variables are decoded by
    rounding, so their marginal stratification applies to the normalized
    coordinate, not to the (few) decoded integer levels.
    """
    if n < 1:
        raise ValidationError("sample size must be >= 1")
    rng = rng_for(seed, 0)
    dims = len(space)
    m = max(n, candidate_factor * n)
    cand = _plain_lhs(m, dims, rng)

    # Greedy maximin elimination: drop the worse half of the closest pair.
    d2 = np.sum((cand[:, None, :] - cand[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    alive = np.ones(m, dtype=bool)
    for _ in range(m - n):
        flat = np.argmin(d2)
        i, j = np.unravel_index(flat, d2.shape)
        # Remove whichever endpoint is more crowded (smaller second-nearest
        # distance); ties break toward the larger index for determinism.
        di = np.partition(d2[i], 1)[1]
        dj = np.partition(d2[j], 1)[1]
        drop = i if di < dj else j
        alive[drop] = False
        d2[drop, :] = np.inf
        d2[:, drop] = np.inf
    kept = cand[alive]

    u = _restratify(kept, rng)
    return [denormalize(space, row) for row in u]
