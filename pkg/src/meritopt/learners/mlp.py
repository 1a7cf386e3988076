"""Single-hidden-layer feed-forward regressor.

Rectifier activation, Adam-style adaptive-moment mini-batch updates
(lr 1e-3, betas 0.9/0.999), L2 penalty on the weight matrices (biases are
not penalized), batch size min(200, n), at most 2000 epochs with early stop
after 10 consecutive epochs whose loss improves by less than ``tol``.

The per-batch loss is 0.5*mean(err^2) + 0.5*alpha*(|W1|^2 + |W2|^2)/batch.
``loss_and_grad`` is the single implementation of that quantity and its
analytic gradient; the training loop consumes it and the tests difference it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import TrainingError
from .scaling import InputScaler, TargetScaler

_LR = 1e-3
_BETA1 = 0.9
_BETA2 = 0.999
_ADAM_EPS = 1e-8
_MAX_EPOCHS = 2000
_PATIENCE = 10


@njit(cache=True)
def loss_and_grad(W1, b1, W2, b2, Xb, yb, alpha):
    """Batch loss and analytic gradients for all four parameter arrays."""
    m = Xb.shape[0]
    H = Xb @ W1
    A = np.empty_like(H)
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            v = H[i, j] + b1[j]
            H[i, j] = v
            A[i, j] = v if v > 0.0 else 0.0
    out = A @ W2 + b2
    err = out - yb
    reg = 0.0
    for j in range(W1.shape[0]):
        for k in range(W1.shape[1]):
            reg += W1[j, k] * W1[j, k]
    for k in range(W2.shape[0]):
        reg += W2[k] * W2[k]
    loss = 0.5 * (err @ err) / m + 0.5 * alpha * reg / m

    g_out = err / m
    gW2 = A.T @ g_out + (alpha / m) * W2
    gb2 = g_out.sum()
    gA = np.outer(g_out, W2)
    for i in range(gA.shape[0]):
        for j in range(gA.shape[1]):
            if H[i, j] <= 0.0:
                gA[i, j] = 0.0
    gW1 = Xb.T @ gA + (alpha / m) * W1
    gb1 = gA.sum(axis=0)
    return loss, gW1, gb1, gW2, gb2


@njit(cache=True)
def _fit_loop(X, z, W1, b1, W2, b2_box, alpha, tol, batch, seed):
    """Train in place; returns (epochs_run, status) with status 1 = non-finite."""
    n = X.shape[0]
    np.random.seed(seed)
    mW1 = np.zeros_like(W1)
    vW1 = np.zeros_like(W1)
    mb1 = np.zeros_like(b1)
    vb1 = np.zeros_like(b1)
    mW2 = np.zeros_like(W2)
    vW2 = np.zeros_like(W2)
    mb2 = 0.0
    vb2 = 0.0
    t = 0
    order = np.arange(n)
    best_loss = np.inf
    bad = 0
    epochs_run = 0
    for _ in range(_MAX_EPOCHS):
        epochs_run += 1
        # Fisher-Yates shuffle with numba's seeded RNG.
        for i in range(n - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch):
            stop = min(start + batch, n)
            idx = order[start:stop]
            Xb = np.ascontiguousarray(X[idx])
            yb = np.ascontiguousarray(z[idx])
            loss, gW1, gb1, gW2, gb2 = loss_and_grad(
                W1, b1, W2, b2_box[0], Xb, yb, alpha
            )
            if not np.isfinite(loss):
                return epochs_run, 1
            epoch_loss += loss
            n_batches += 1
            t += 1
            c1 = 1.0 - _BETA1**t
            c2 = 1.0 - _BETA2**t
            for a_ in range(W1.shape[0]):
                for c_ in range(W1.shape[1]):
                    g = gW1[a_, c_]
                    mW1[a_, c_] = _BETA1 * mW1[a_, c_] + (1 - _BETA1) * g
                    vW1[a_, c_] = _BETA2 * vW1[a_, c_] + (1 - _BETA2) * g * g
                    W1[a_, c_] -= _LR * (mW1[a_, c_] / c1) / (
                        np.sqrt(vW1[a_, c_] / c2) + _ADAM_EPS
                    )
            for c_ in range(b1.shape[0]):
                g = gb1[c_]
                mb1[c_] = _BETA1 * mb1[c_] + (1 - _BETA1) * g
                vb1[c_] = _BETA2 * vb1[c_] + (1 - _BETA2) * g * g
                b1[c_] -= _LR * (mb1[c_] / c1) / (np.sqrt(vb1[c_] / c2) + _ADAM_EPS)
            for c_ in range(W2.shape[0]):
                g = gW2[c_]
                mW2[c_] = _BETA1 * mW2[c_] + (1 - _BETA1) * g
                vW2[c_] = _BETA2 * vW2[c_] + (1 - _BETA2) * g * g
                W2[c_] -= _LR * (mW2[c_] / c1) / (np.sqrt(vW2[c_] / c2) + _ADAM_EPS)
            mb2 = _BETA1 * mb2 + (1 - _BETA1) * gb2
            vb2 = _BETA2 * vb2 + (1 - _BETA2) * gb2 * gb2
            b2_box[0] -= _LR * (mb2 / c1) / (np.sqrt(vb2 / c2) + _ADAM_EPS)
        epoch_loss /= n_batches
        if epoch_loss < best_loss - tol:
            bad = 0
        else:
            bad += 1
        if epoch_loss < best_loss:
            best_loss = epoch_loss
        if bad >= _PATIENCE:
            break
    return epochs_run, 0


@njit(cache=True)
def _forward(X, W1, b1, W2, b2):
    H = X @ W1
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            v = H[i, j] + b1[j]
            H[i, j] = v if v > 0.0 else 0.0
    return H @ W2 + b2


@dataclass
class MLPModel:
    input_scaler: InputScaler
    target_scaler: TargetScaler
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    epochs_run: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        Q = np.ascontiguousarray(self.input_scaler.transform(np.atleast_2d(X)))
        return self.target_scaler.inverse(_forward(Q, self.W1, self.b1, self.W2, self.b2))


def init_params(n_features: int, width: int, seed: int):
    """Uniform Glorot init for both layers; biases start at zero."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (n_features + width))
    lim2 = np.sqrt(6.0 / (width + 1))
    W1 = rng.uniform(-lim1, lim1, size=(n_features, width))
    b1 = np.zeros(width)
    W2 = rng.uniform(-lim2, lim2, size=width)
    return W1, b1, W2, 0.0


def train(X: np.ndarray, y: np.ndarray, hp: dict, seed: int = 0) -> MLPModel:
    """Fit the network. ``hp``: width (>= 1), alpha (>= 0), tol (> 0)."""
    width = int(hp["width"])
    alpha = float(hp["alpha"])
    tol = float(hp["tol"])
    if width < 1:
        raise TrainingError(f"mlp: width must be >= 1, got {width}")
    if alpha < 0 or tol <= 0:
        raise TrainingError(f"mlp: need alpha >= 0 and tol > 0, got {hp}")
    in_scaler = InputScaler.fit(X)
    t_scaler = TargetScaler.fit(y)
    X01 = np.ascontiguousarray(in_scaler.transform(X))
    z = t_scaler.transform(y)
    n = len(z)
    W1, b1, W2, b2 = init_params(X01.shape[1], width, seed)
    batch = min(200, n)
    # The intercept lives in a length-1 array so the jitted loop updates it in place.
    b2_box = np.array([b2])
    epochs, status = _fit_loop(X01, z, W1, b1, W2, b2_box, alpha, tol, batch, seed)
    if status != 0:
        raise TrainingError("mlp: loss became non-finite during training")
    return MLPModel(in_scaler, t_scaler, W1, b1, W2, float(b2_box[0]), epochs)
