"""Kernel ridge regression with an RBF kernel, solved in closed form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from ..errors import TrainingError
from .scaling import InputScaler, TargetScaler


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


@dataclass
class KRRModel:
    input_scaler: InputScaler
    target_scaler: TargetScaler
    gamma: float
    X01: np.ndarray
    dual_coef: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        Q = self.input_scaler.transform(np.atleast_2d(X))
        K = rbf_kernel(Q, self.X01, self.gamma)
        return self.target_scaler.inverse(K @ self.dual_coef)


def train(X: np.ndarray, y: np.ndarray, hp: dict, seed: int = 0) -> KRRModel:
    """Solve (K + alpha I) a = z by Cholesky. ``hp``: alpha (> 0), gamma (> 0)."""
    alpha = float(hp["alpha"])
    gamma = float(hp["gamma"])
    if alpha <= 0 or gamma <= 0:
        raise TrainingError(f"krr: alpha and gamma must be > 0, got {alpha}, {gamma}")
    in_scaler = InputScaler.fit(X)
    t_scaler = TargetScaler.fit(y)
    X01 = in_scaler.transform(X)
    z = t_scaler.transform(y)
    K = rbf_kernel(X01, X01, gamma)
    K[np.diag_indices_from(K)] += alpha
    try:
        dual = cho_solve(cho_factor(K, lower=True), z)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(K)
        raise TrainingError(
            f"krr: kernel system not positive definite (alpha={alpha}, "
            f"gamma={gamma}, cond~{cond:.2e}): {exc}"
        )
    return KRRModel(in_scaler, t_scaler, gamma, X01, dual)
