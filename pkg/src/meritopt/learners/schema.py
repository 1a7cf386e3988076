"""Tunable hyperparameter schema for the five learner families.

Each entry describes one tunable in "raw" units, the coordinate system the
tuner searches in. Log-scaled entries store base-10 exponents; integral
entries are rounded to the nearest integer after decoding. Defaults decode to
the values the learners use when no tuning has run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_INV_NFEATURES = 1.0 / 9.0  # nine design variables


@dataclass(frozen=True)
class HyperparameterSpec:
    """One tunable: raw default and bounds, scale, and integrality."""

    name: str
    default_raw: float
    min_raw: float
    max_raw: float
    log: bool = False
    integral: bool = False

    def __post_init__(self):
        if not self.min_raw <= self.default_raw <= self.max_raw:
            raise ValueError(f"{self.name}: default {self.default_raw} outside raw bounds")

    def decode(self, raw: float) -> float | int:
        value = 10.0**raw if self.log else float(raw)
        if self.integral:
            return int(np.rint(value))
        return value


HYPERPARAMETER_SCHEMA: dict[str, tuple[HyperparameterSpec, ...]] = {
    "rpr": (
        HyperparameterSpec("alpha", 0.0, -6.0, 0.0, log=True),
        HyperparameterSpec("degree", 2.0, 1.0, 10.0, integral=True),
    ),
    "svr": (
        HyperparameterSpec("nu", 0.5, 1e-10, 1.0),
        HyperparameterSpec("c", 0.0, -6.0, 2.5, log=True),
        HyperparameterSpec("gamma", math.log10(_INV_NFEATURES), -6.0, 0.0, log=True),
    ),
    "krr": (
        HyperparameterSpec("alpha", 0.0, -6.0, 0.0, log=True),
        HyperparameterSpec("gamma", math.log10(_INV_NFEATURES), -4.0, 0.0, log=True),
    ),
    "gbt": (
        HyperparameterSpec("n_trees", 3.0, 2.0, 4.0, log=True, integral=True),
        HyperparameterSpec("learning_rate", -1.0, -3.0, 0.0, log=True),
        HyperparameterSpec("max_depth", 6.0, 2.0, 8.0, integral=True),
    ),
    "mlp": (
        HyperparameterSpec("width", 100.0, 10.0, 250.0, integral=True),
        HyperparameterSpec("alpha", -4.0, -6.0, 0.0, log=True),
        HyperparameterSpec("tol", -4.0, -6.0, -2.0, log=True),
    ),
}


def decode_hyperparams(kind: str, raw: np.ndarray | list[float]) -> dict:
    """Decode a raw vector (schema order) into a named hyperparameter dict."""
    specs = HYPERPARAMETER_SCHEMA[kind]
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (len(specs),):
        raise ValueError(f"{kind}: expected {len(specs)} raw values, got {raw.shape}")
    for spec, r in zip(specs, raw):
        if not spec.min_raw <= r <= spec.max_raw:
            raise ValueError(f"{kind}.{spec.name}: raw {r} outside [{spec.min_raw}, {spec.max_raw}]")
    return {spec.name: spec.decode(r) for spec, r in zip(specs, raw)}


def default_raw(kind: str) -> np.ndarray:
    return np.array([s.default_raw for s in HYPERPARAMETER_SCHEMA[kind]])


def default_hyperparams(kind: str) -> dict:
    return decode_hyperparams(kind, default_raw(kind))


def raw_bounds(kind: str) -> tuple[np.ndarray, np.ndarray]:
    specs = HYPERPARAMETER_SCHEMA[kind]
    return (
        np.array([s.min_raw for s in specs]),
        np.array([s.max_raw for s in specs]),
    )
