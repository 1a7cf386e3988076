"""Gradient-boosted regression trees with exact greedy splits.

Squared loss, constant learning rate, depth-capped trees, L2 leaf
regularization (lambda fixed at 1.0), no row or column subsampling. Trees are
grown level-wise over presorted feature columns so each level costs one pass
per feature; the whole boosting loop is jit-compiled because tuned models can
carry thousands of trees.

Leaf value is the regularized mean residual -sum(g)/(count + lambda), scaled
by the learning rate at store time. A split must improve the regularized gain
strictly, so a constant target yields empty trees and exact predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import TrainingError
from .scaling import InputScaler, TargetScaler

_LAMBDA = 1.0
_GAIN_EPS = 1e-12


@njit(cache=True)
def _boost(X, z, n_trees, lr, max_depth, lam):
    n, d = X.shape
    sort_idx = np.empty((n, d), dtype=np.int64)
    for j in range(d):
        sort_idx[:, j] = np.argsort(X[:, j])

    base = z.mean()
    pred = np.full(n, base)

    max_nodes = 2 ** (max_depth + 1) - 1
    if max_nodes > 2 * n - 1:
        max_nodes = 2 * n - 1

    # Per-tree scratch, indexed by node id.
    node_of = np.zeros(n, dtype=np.int64)
    node_g = np.zeros(max_nodes)
    node_h = np.zeros(max_nodes, dtype=np.int64)
    best_gain = np.zeros(max_nodes)
    best_feat = np.zeros(max_nodes, dtype=np.int64)
    best_thresh = np.zeros(max_nodes)
    run_g = np.zeros(max_nodes)
    run_h = np.zeros(max_nodes, dtype=np.int64)
    last_x = np.zeros(max_nodes)
    t_feat = np.zeros(max_nodes, dtype=np.int32)
    t_thresh = np.zeros(max_nodes)
    t_left = np.zeros(max_nodes, dtype=np.int32)
    t_right = np.zeros(max_nodes, dtype=np.int32)
    t_value = np.zeros(max_nodes)

    # Global flattened forest, grown by doubling.
    cap = 64 * n_trees
    f_feat = np.zeros(cap, dtype=np.int32)
    f_thresh = np.zeros(cap)
    f_left = np.zeros(cap, dtype=np.int32)
    f_right = np.zeros(cap, dtype=np.int32)
    f_value = np.zeros(cap)
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    total = 0

    g = np.empty(n)
    for t in range(n_trees):
        for i in range(n):
            g[i] = pred[i] - z[i]
            node_of[i] = 0
        node_g[0] = g.sum()
        node_h[0] = n
        n_nodes = 1
        level_lo = 0
        level_hi = 1
        depth = 0
        while level_hi > level_lo:
            # Find the best split of every node in this level.
            for nd in range(level_lo, level_hi):
                best_gain[nd] = _GAIN_EPS
                best_feat[nd] = -1
            if depth < max_depth:
                for j in range(d):
                    for nd in range(level_lo, level_hi):
                        run_g[nd] = 0.0
                        run_h[nd] = 0
                    for s in range(n):
                        i = sort_idx[s, j]
                        nd = node_of[i]
                        if nd < level_lo:
                            continue
                        x = X[i, j]
                        hl = run_h[nd]
                        if hl > 0 and x > last_x[nd]:
                            hr = node_h[nd] - hl
                            if hr > 0:
                                gl = run_g[nd]
                                gr = node_g[nd] - gl
                                gain = (
                                    gl * gl / (hl + lam)
                                    + gr * gr / (hr + lam)
                                    - node_g[nd] * node_g[nd] / (node_h[nd] + lam)
                                )
                                if gain > best_gain[nd]:
                                    best_gain[nd] = gain
                                    best_feat[nd] = j
                                    mid = 0.5 * (x + last_x[nd])
                                    if mid <= last_x[nd]:
                                        mid = x
                                    best_thresh[nd] = mid
                        run_g[nd] += g[i]
                        run_h[nd] += 1
                        last_x[nd] = x

            # Materialize splits / leaves for this level.
            next_lo = level_hi
            for nd in range(level_lo, level_hi):
                if best_feat[nd] >= 0 and n_nodes + 2 <= max_nodes:
                    t_feat[nd] = np.int32(best_feat[nd])
                    t_thresh[nd] = best_thresh[nd]
                    t_left[nd] = np.int32(n_nodes)
                    t_right[nd] = np.int32(n_nodes + 1)
                    t_value[nd] = 0.0
                    node_g[n_nodes] = 0.0
                    node_h[n_nodes] = 0
                    node_g[n_nodes + 1] = 0.0
                    node_h[n_nodes + 1] = 0
                    n_nodes += 2
                else:
                    t_feat[nd] = np.int32(-1)
                    t_left[nd] = np.int32(-1)
                    t_right[nd] = np.int32(-1)
                    t_thresh[nd] = 0.0
                    t_value[nd] = -lr * node_g[nd] / (node_h[nd] + lam)

            # Send samples of split nodes to their children.
            for i in range(n):
                nd = node_of[i]
                if nd >= level_lo and t_feat[nd] >= 0:
                    child = t_left[nd] if X[i, t_feat[nd]] < t_thresh[nd] else t_right[nd]
                    node_of[i] = child
                    node_g[child] += g[i]
                    node_h[child] += 1

            level_lo = next_lo
            level_hi = n_nodes
            depth += 1

        # Apply the tree and append it to the forest.
        for i in range(n):
            pred[i] += t_value[node_of[i]]
        if total + n_nodes > cap:
            new_cap = cap
            while total + n_nodes > new_cap:
                new_cap *= 2
            nf = np.zeros(new_cap, dtype=np.int32)
            nth = np.zeros(new_cap)
            nl = np.zeros(new_cap, dtype=np.int32)
            nr = np.zeros(new_cap, dtype=np.int32)
            nv = np.zeros(new_cap)
            nf[:total] = f_feat[:total]
            nth[:total] = f_thresh[:total]
            nl[:total] = f_left[:total]
            nr[:total] = f_right[:total]
            nv[:total] = f_value[:total]
            f_feat, f_thresh, f_left, f_right, f_value = nf, nth, nl, nr, nv
            cap = new_cap
        f_feat[total : total + n_nodes] = t_feat[:n_nodes]
        f_thresh[total : total + n_nodes] = t_thresh[:n_nodes]
        f_left[total : total + n_nodes] = t_left[:n_nodes]
        f_right[total : total + n_nodes] = t_right[:n_nodes]
        f_value[total : total + n_nodes] = t_value[:n_nodes]
        total += n_nodes
        offsets[t + 1] = total

    return (
        base,
        f_feat[:total].copy(),
        f_thresh[:total].copy(),
        f_left[:total].copy(),
        f_right[:total].copy(),
        f_value[:total].copy(),
        offsets,
    )


@njit(cache=True)
def _forest_predict(Q, base, feat, thresh, left, right, value, offsets):
    m = Q.shape[0]
    out = np.full(m, base)
    n_trees = offsets.shape[0] - 1
    for t in range(n_trees):
        root = offsets[t]
        for i in range(m):
            nd = root
            while feat[nd] >= 0:
                if Q[i, feat[nd]] < thresh[nd]:
                    nd = root + left[nd]
                else:
                    nd = root + right[nd]
            out[i] += value[nd]
    return out


@dataclass
class GBTModel:
    input_scaler: InputScaler
    target_scaler: TargetScaler
    base: float
    feat: np.ndarray
    thresh: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        Q = np.ascontiguousarray(self.input_scaler.transform(np.atleast_2d(X)))
        z = _forest_predict(
            Q, self.base, self.feat, self.thresh, self.left, self.right,
            self.value, self.offsets,
        )
        return self.target_scaler.inverse(z)

    def staged_train_mse(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Training MSE after each boosting round (diagnostic/testing aid)."""
        Q = np.ascontiguousarray(self.input_scaler.transform(np.atleast_2d(X)))
        z = self.target_scaler.transform(y)
        pred = np.full(len(z), self.base)
        out = np.empty(len(self.offsets) - 1)
        for t in range(len(self.offsets) - 1):
            off = self.offsets[t : t + 2].copy()
            off -= off[0]
            seg = slice(self.offsets[t], self.offsets[t + 1])
            pred += _forest_predict(
                Q, 0.0, self.feat[seg], self.thresh[seg], self.left[seg],
                self.right[seg], self.value[seg], off,
            )
            out[t] = float(np.mean((pred - z) ** 2))
        return out


def train(X: np.ndarray, y: np.ndarray, hp: dict, seed: int = 0) -> GBTModel:
    """Boost ``n_trees`` depth-capped trees. ``hp``: n_trees, learning_rate, max_depth."""
    n_trees = int(hp["n_trees"])
    lr = float(hp["learning_rate"])
    max_depth = int(hp["max_depth"])
    if n_trees < 1 or max_depth < 1:
        raise TrainingError(f"gbt: need n_trees >= 1 and max_depth >= 1, got {hp}")
    if not 0 < lr <= 1:
        raise TrainingError(f"gbt: learning rate must be in (0, 1], got {lr}")
    in_scaler = InputScaler.fit(X)
    t_scaler = TargetScaler.fit(y)
    X01 = np.ascontiguousarray(in_scaler.transform(X))
    z = t_scaler.transform(y)
    base, feat, thresh, left, right, value, offsets = _boost(
        X01, z, n_trees, lr, max_depth, _LAMBDA
    )
    return GBTModel(in_scaler, t_scaler, float(base), feat, thresh, left, right, value, offsets)
