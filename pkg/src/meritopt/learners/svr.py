"""nu-SVR with an RBF kernel, solved by two-group SMO dual ascent.

The dual minimizes 0.5 u' K u - y' u over u = a* - a subject to
sum(a - a*) = 0, sum(a + a*) = C * nu, and 0 <= a_i, a*_i <= C/n. Starting
from a feasible fill, pair updates stay within one multiplier group so both
equality constraints are preserved; iteration stops when the largest KKT
violation across the two groups drops below the tolerance. Holding the sum
constraint at equality makes the nu property (support-vector fraction >= nu)
structural.

The intercept and the tube half-width are recovered from the free support
vectors of each group, with interval midpoints as the fallback when a group
is fully bounded. The kernel matrix is computed densely: training sets here
are a few hundred rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import TrainingError
from .krr import rbf_kernel
from .scaling import InputScaler, TargetScaler

_KKT_TOL = 1e-4


@njit(cache=True)
def _smo(K, y, box, tol, max_iter):
    n = y.shape[0]
    a = np.zeros(n)
    a_star = np.zeros(n)
    # Feasible fill: both group sums equal half the budget (the caller packs
    # the budget into the extra trailing slot of ``box``).
    half = 0.5 * box[n]
    acc = 0.0
    for i in range(n):
        take = min(box[i], half - acc)
        if take < 0.0:
            take = 0.0
        a[i] = take
        a_star[i] = take
        acc += take

    # u = a* - a starts at 0, so the dual gradient K u - y starts at -y.
    G = -y.copy()
    u = np.zeros(n)
    it = 0
    while it < max_iter:
        it += 1
        # Group a: increase where G is large, decrease where G is small.
        up_a = -1
        dn_a = -1
        up_a_val = -np.inf
        dn_a_val = np.inf
        # Group a*: increase where G is small, decrease where G is large.
        up_s = -1
        dn_s = -1
        up_s_val = np.inf
        dn_s_val = -np.inf
        for i in range(n):
            if a[i] < box[i] and G[i] > up_a_val:
                up_a_val = G[i]
                up_a = i
            if a[i] > 0.0 and G[i] < dn_a_val:
                dn_a_val = G[i]
                dn_a = i
            if a_star[i] < box[i] and G[i] < up_s_val:
                up_s_val = G[i]
                up_s = i
            if a_star[i] > 0.0 and G[i] > dn_s_val:
                dn_s_val = G[i]
                dn_s = i
        viol_a = -np.inf
        if up_a >= 0 and dn_a >= 0 and up_a != dn_a:
            viol_a = up_a_val - dn_a_val
        viol_s = -np.inf
        if up_s >= 0 and dn_s >= 0 and up_s != dn_s:
            viol_s = dn_s_val - up_s_val
        if max(viol_a, viol_s) < tol:
            break
        if viol_a >= viol_s:
            i, j = up_a, dn_a
            eta = K[i, i] - 2.0 * K[i, j] + K[j, j]
            if eta < 1e-12:
                eta = 1e-12
            delta = (G[i] - G[j]) / eta
            room = min(box[i] - a[i], a[j])
            if delta > room:
                delta = room
            a[i] += delta
            a[j] -= delta
            u[i] -= delta
            u[j] += delta
            for m in range(n):
                G[m] += delta * (K[m, j] - K[m, i])
        else:
            i, j = up_s, dn_s
            eta = K[i, i] - 2.0 * K[i, j] + K[j, j]
            if eta < 1e-12:
                eta = 1e-12
            delta = (G[j] - G[i]) / eta
            room = min(box[i] - a_star[i], a_star[j])
            if delta > room:
                delta = room
            a_star[i] += delta
            a_star[j] -= delta
            u[i] += delta
            u[j] -= delta
            for m in range(n):
                G[m] += delta * (K[m, i] - K[m, j])
    return a, a_star, u, G, it


@dataclass
class SVRModel:
    input_scaler: InputScaler
    target_scaler: TargetScaler
    gamma: float
    X01: np.ndarray
    dual_coef: np.ndarray  # u = a* - a
    intercept: float
    epsilon: float
    n_support: int
    kkt_violation: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        Q = self.input_scaler.transform(np.atleast_2d(X))
        K = rbf_kernel(Q, self.X01, self.gamma)
        return self.target_scaler.inverse(K @ self.dual_coef + self.intercept)

    @property
    def support_fraction(self) -> float:
        return self.n_support / len(self.dual_coef)


def train(X: np.ndarray, y: np.ndarray, hp: dict, seed: int = 0) -> SVRModel:
    """Fit nu-SVR. ``hp``: nu in (0, 1], c > 0, gamma > 0."""
    nu = float(hp["nu"])
    c = float(hp["c"])
    gamma = float(hp["gamma"])
    if not 0 < nu <= 1:
        raise TrainingError(f"svr: nu must be in (0, 1], got {nu}")
    if c <= 0 or gamma <= 0:
        raise TrainingError(f"svr: c and gamma must be > 0, got {c}, {gamma}")
    in_scaler = InputScaler.fit(X)
    t_scaler = TargetScaler.fit(y)
    X01 = in_scaler.transform(X)
    z = t_scaler.transform(y)
    n = len(z)
    K = rbf_kernel(X01, X01, gamma)
    box = np.empty(n + 1)
    box[:n] = c / n
    box[n] = c * nu  # total budget for sum(a + a*)
    max_iter = max(200_000, 2000 * n)
    a, a_star, u, G, iters = _smo(K, z, box, _KKT_TOL, max_iter)
    if iters >= max_iter:
        raise TrainingError(
            f"svr: SMO did not reach KKT tolerance {_KKT_TOL} in {max_iter} iterations"
        )

    # Recover intercept and tube width from free vectors; R = y - K u = -G.
    R = -G
    bb = box[:n]
    eps_free = 1e-10 * max(1.0, float(bb[0]))
    free_a = (a > eps_free) & (a < bb - eps_free)
    free_s = (a_star > eps_free) & (a_star < bb - eps_free)
    # Free a:  b - eps = R_i;  free a*:  b + eps = R_i.
    if free_a.any():
        lo = float(R[free_a].mean())
    else:
        upper = R[a <= eps_free]
        lower = R[a >= bb - eps_free]
        hi_b = upper.min() if upper.size else np.inf
        lo_b = lower.max() if lower.size else -np.inf
        lo = _midpoint(lo_b, hi_b)
    if free_s.any():
        hi = float(R[free_s].mean())
    else:
        lower = R[a_star <= eps_free]
        upper = R[a_star >= bb - eps_free]
        lo_b = lower.max() if lower.size else -np.inf
        hi_b = upper.min() if upper.size else np.inf
        hi = _midpoint(lo_b, hi_b)
    intercept = 0.5 * (lo + hi)
    epsilon = max(0.0, 0.5 * (hi - lo))

    viol = _kkt_violation(a, a_star, G, bb, eps_free)
    return SVRModel(
        in_scaler, t_scaler, gamma, X01, u, intercept, epsilon,
        int(np.count_nonzero(a + a_star > eps_free)), viol,
    )


def _midpoint(lo: float, hi: float) -> float:
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


def _kkt_violation(a, a_star, G, box, eps) -> float:
    """Largest remaining pairwise violation across the two groups."""
    inc_a = G[a < box - eps].max(initial=-np.inf)
    dec_a = G[a > eps].min(initial=np.inf)
    va = inc_a - dec_a
    inc_s = G[a_star < box - eps].min(initial=np.inf)
    dec_s = G[a_star > eps].max(initial=-np.inf)
    vs = dec_s - inc_s
    return float(max(va, vs, 0.0))
