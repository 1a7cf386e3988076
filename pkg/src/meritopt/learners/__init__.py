"""Base regression learners.

Five families share one calling convention: ``train(kind, X, y, hp, seed)``
returns a fitted model exposing ``predict(X) -> array``. Inputs are z-score
standardized per feature and targets are z-scored inside ``train``; both
scalers are fit on the training rows only, and ``predict`` returns native
units.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .schema import (
    HYPERPARAMETER_SCHEMA,
    HyperparameterSpec,
    decode_hyperparams,
    default_hyperparams,
    default_raw,
    raw_bounds,
)
from . import gbt, krr, mlp, rpr, svr

KINDS = ("rpr", "svr", "krr", "gbt", "mlp")

_TRAINERS = {
    "rpr": rpr.train,
    "svr": svr.train,
    "krr": krr.train,
    "gbt": gbt.train,
    "mlp": mlp.train,
}


def train(kind: str, X: np.ndarray, y: np.ndarray, hp: dict, seed: int = 0):
    """Train one base learner; see the learner modules for semantics."""
    if kind not in _TRAINERS:
        raise ValueError(f"unknown learner kind {kind!r}; expected one of {KINDS}")
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} are inconsistent")
    if X.shape[0] < 2:
        raise TrainingError("need at least 2 training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingError("training data contains non-finite values")
    return _TRAINERS[kind](X, y, hp, seed)


__all__ = [
    "KINDS",
    "train",
    "HyperparameterSpec",
    "HYPERPARAMETER_SCHEMA",
    "decode_hyperparams",
    "default_hyperparams",
    "default_raw",
    "raw_bounds",
]
