"""Ridge polynomial regression: full monomial expansion, then an L2 solve.

The expansion of nine features at degree d has C(9+d, d) monomials, which at
the top of the tuning range (d = 10) is ~92k columns for ~150 rows. Training
therefore solves the dual (Gram) system when columns outnumber rows. The Gram
matrix decomposes into per-degree increments F_d @ F_d.T (each only n x n), so
those increments are cached per training matrix: tuning candidates that
revisit the same fold pay the expansion cost once across all degrees, and the
cache stays small no matter how wide the expansion gets.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from math import comb

import numpy as np

from ..errors import TrainingError
from .scaling import InputScaler, TargetScaler

_INC_CACHE: OrderedDict[bytes, list[np.ndarray]] = OrderedDict()
_INC_CACHE_MAX = 32
# Cap transient expansion blocks at ~32 MB of float64.
_CHUNK_BUDGET = 4_000_000


def n_monomials(dims: int, degree: int) -> int:
    """Number of expansion columns (bias included)."""
    return comb(dims + degree, degree)


def _degree_blocks(X: np.ndarray, degree: int):
    """Yield the exact-degree monomial blocks of X for degrees 0..degree.

    Block 0 is the bias column; block k holds the monomials of total degree
    exactly k in combinations-with-replacement order. Only one previous block
    is kept alive, so peak memory is the widest single block.
    """
    n, d = X.shape
    yield np.ones((n, 1))
    if degree < 1:
        return
    block = np.array(X, dtype=float)
    yield block
    starts = np.arange(d)  # offset of each leading variable within `block`
    for _ in range(2, degree + 1):
        width = int(np.sum(block.shape[1] - starts))
        new = np.empty((n, width))
        new_starts = np.empty(d, dtype=np.int64)
        col = 0
        for j in range(d):
            new_starts[j] = col
            src = block[:, starts[j] :]
            np.multiply(X[:, j : j + 1], src, out=new[:, col : col + src.shape[1]])
            col += src.shape[1]
        block = new
        starts = new_starts
        yield block


def expand(X: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of X up to total degree ``degree``, bias column first.

    Column order is deterministic: degree blocks in ascending order, and
    within a block the standard combinations-with-replacement order.
    """
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    return np.concatenate(list(_degree_blocks(X, degree)), axis=1)


def _gram_increments(Xs: np.ndarray, degree: int) -> list[np.ndarray]:
    """Cached per-degree Gram increments [F_0 F_0.T, ..., F_deg F_deg.T]."""
    key = hashlib.blake2b(Xs.tobytes(), digest_size=16).digest()
    incs = _INC_CACHE.get(key)
    if incs is None:
        incs = []
        _INC_CACHE[key] = incs
    _INC_CACHE.move_to_end(key)
    if len(_INC_CACHE) > _INC_CACHE_MAX:
        _INC_CACHE.popitem(last=False)
    if len(incs) <= degree:
        for k, block in enumerate(_degree_blocks(Xs, degree)):
            if k >= len(incs):
                incs.append(block @ block.T)
    return incs


@dataclass
class RPRModel:
    input_scaler: InputScaler
    target_scaler: TargetScaler
    degree: int
    coef: np.ndarray  # over expansion columns, bias first

    def predict(self, X: np.ndarray) -> np.ndarray:
        Xs = self.input_scaler.transform(np.atleast_2d(X))
        chunk = max(1, _CHUNK_BUDGET // len(self.coef))
        if len(Xs) <= chunk:
            out = expand(Xs, self.degree) @ self.coef
        else:
            out = np.concatenate(
                [
                    expand(Xs[i : i + chunk], self.degree) @ self.coef
                    for i in range(0, len(Xs), chunk)
                ]
            )
        return self.target_scaler.inverse(out)


def train(X: np.ndarray, y: np.ndarray, hp: dict, seed: int = 0) -> RPRModel:
    """Fit the expansion-plus-ridge model. ``hp``: alpha (> 0), degree (>= 1)."""
    alpha = float(hp["alpha"])
    degree = int(hp["degree"])
    if alpha <= 0:
        raise TrainingError(f"rpr: alpha must be > 0, got {alpha}")
    in_scaler = InputScaler.fit(X)
    t_scaler = TargetScaler.fit(y)
    Xs = in_scaler.transform(X)
    z = t_scaler.transform(y)
    n = Xs.shape[0]
    p = n_monomials(Xs.shape[1], degree)
    try:
        if p <= n:
            F = expand(Xs, degree)
            A = F.T @ F
            A[np.diag_indices_from(A)] += alpha
            coef = np.linalg.solve(A, F.T @ z)
        else:
            # Dual form: coef = F.T (F F.T + alpha I)^-1 z, exact for alpha > 0.
            incs = _gram_increments(Xs, degree)
            G = np.sum(incs[: degree + 1], axis=0)
            G[np.diag_indices_from(G)] += alpha
            dual = np.linalg.solve(G, z)
            coef = np.concatenate(
                [block.T @ dual for block in _degree_blocks(Xs, degree)]
            )
    except np.linalg.LinAlgError as exc:
        raise TrainingError(f"rpr: ridge solve failed (degree={degree}, alpha={alpha}): {exc}")
    if not np.all(np.isfinite(coef)):
        raise TrainingError(f"rpr: non-finite coefficients (degree={degree}, alpha={alpha})")
    return RPRModel(in_scaler, t_scaler, degree, coef)
