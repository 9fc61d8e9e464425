"""Transport costs on finite action sets and the exact optimal-transport discrepancy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import linprog_min
from .validation import as_probs, as_weights, check_cost_matrix, check_distribution

TAXI_MOVE = (0, 1, 2, 3)
TAXI_PASSENGER = (4, 5)

# Shift of c(passenger -> move) relative to c(move -> passenger) = 1.
TAXI_COST_SHIFTS = {
    "equal": 0.0,
    "cheap": -0.2,
    "expensive": 0.2,
    "very_cheap": -0.5,
    "very_expensive": 0.5,
}


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """``c[a, a']``: cost of moving probability mass from action ``a`` to ``a'``."""

    c: np.ndarray

    def __post_init__(self):
        c = np.array(check_cost_matrix(self.c), dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n_actions(self) -> int:
        return self.c.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.c if dtype is None else self.c.astype(dtype)


def binary_cost(n_actions) -> CostMatrix:
    """0 on the diagonal, 1 elsewhere; the discrepancy becomes total variation."""
    if n_actions < 1:
        raise ValueError("n_actions must be at least 1")
    return CostMatrix(1.0 - np.eye(n_actions))


def taxi_ablation_cost(variant) -> CostMatrix:
    """Taxi costs splitting actions into Move = {S, N, E, W} and Passenger = {PickUp, DropOff}.

    Within-class costs and c(move, passenger) are 1; c(passenger, move) is
    shifted by -0.2 (cheap), +0.2 (expensive), -0.5 (very_cheap) or +0.5
    (very_expensive).
    """
    key = str(variant).replace("-", "_")
    if key not in TAXI_COST_SHIFTS:
        raise ValueError(f"unknown Taxi cost variant {variant!r}; choose from {sorted(TAXI_COST_SHIFTS)}")
    c = 1.0 - np.eye(6)
    for p in TAXI_PASSENGER:
        for m in TAXI_MOVE:
            c[p, m] = 1.0 + TAXI_COST_SHIFTS[key]
    return CostMatrix(c)


def squared_euclidean_cost(points) -> CostMatrix:
    """``|x - y|^2`` between action embeddings ``points`` (shape ``(n,)`` or ``(n, d)``)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    diff = pts[:, None, :] - pts[None, :, :]
    return CostMatrix((diff ** 2).sum(axis=-1))


COST_VARIANTS = ("binary", "equal", "cheap", "expensive", "very-cheap", "very-expensive", "sq-euclid")


def make_cost(variant, n_actions) -> CostMatrix:
    """Build a cost by CLI name. ``sq-euclid`` embeds actions at ``0, 1/(n-1), ..., 1``."""
    if variant == "binary":
        return binary_cost(n_actions)
    if variant == "sq-euclid":
        return squared_euclidean_cost(np.linspace(0.0, 1.0, n_actions))
    if n_actions != 6:
        raise ValueError(f"cost variant {variant!r} is defined for the 6 Taxi actions only")
    return taxi_ablation_cost(variant)


def ot_discrepancy(mu, nu, cost) -> float:
    """Exact ``min_{gamma in Gamma(mu, nu)} sum gamma * c`` via the simplex on the supports."""
    c = check_cost_matrix(cost)
    mu = check_distribution(mu, "mu")
    nu = check_distribution(nu, "nu")
    if mu.size != c.shape[0] or nu.size != c.shape[0]:
        raise ValueError("distribution length does not match the cost matrix")
    if np.array_equal(mu, nu):
        return 0.0
    rows = np.flatnonzero(mu > 0)
    cols = np.flatnonzero(nu > 0)
    sub = c[np.ix_(rows, cols)]
    a, b = mu[rows], nu[cols]
    if rows.size == 1 or cols.size == 1:
        # Only one coupling exists.
        return float(max(0.0, (np.outer(a, b) * sub).sum()))
    off = c[~np.eye(c.shape[0], dtype=bool)]
    if off.size and np.all(off == off[0]):
        # Uniform off-diagonal cost: every plan pays kappa * (1 - diagonal mass),
        # and the diagonal carries at most sum min(mu, nu).
        return float(off[0] * (1.0 - np.minimum(mu, nu).sum()))
    m, n = sub.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    # Renormalise the sub-marginals so both sides carry exactly the same mass.
    b_eq = np.concatenate([a / a.sum(), b / b.sum()])
    res = linprog_min(sub.ravel(), A_eq=A_eq, b_eq=b_eq)
    if res.status != "optimal":
        raise RuntimeError(f"transport LP ended with status {res.status}")
    return float(max(0.0, res.fun))


def transport_plan_cost(mu, plan_targets, cost) -> float:
    """Cost of the map ``j -> plan_targets[j]`` applied to ``mu`` (an upper bound on OT)."""
    c = check_cost_matrix(cost)
    mu = np.asarray(mu, float)
    return float(mu @ c[np.arange(mu.size), np.asarray(plan_targets)])


def total_variation(mu, nu) -> float:
    return 0.5 * float(np.abs(np.asarray(mu, float) - np.asarray(nu, float)).sum())


def avg_trust_region_value(old, new, occupancy, cost) -> float:
    """``sum_s rho(s) * OT(old(.|s), new(.|s))``; rows with zero weight are skipped."""
    p, q = as_probs(old), as_probs(new)
    w = as_weights(occupancy)
    if p.shape != q.shape or w.shape != (p.shape[0],):
        raise ValueError("policy and occupancy shapes disagree")
    total = 0.0
    for s in np.flatnonzero(w > 0):
        total += w[s] * ot_discrepancy(p[s], q[s], cost)
    return float(total)


def per_state_discrepancy(old, new, cost) -> np.ndarray:
    p, q = as_probs(old), as_probs(new)
    return np.array([ot_discrepancy(p[s], q[s], cost) for s in range(p.shape[0])])


def kl_divergence(p, q) -> float:
    """``KL(p || q)``; ``inf`` when ``p`` puts mass where ``q`` has none."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    support = p > 0
    if np.any(q[support] == 0):
        return float("inf")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def avg_kl(p_policy, q_policy, occupancy) -> float:
    """``sum_s rho(s) KL(p(.|s) || q(.|s))``; ``inf`` on any weighted support mismatch."""
    p, q = as_probs(p_policy), as_probs(q_policy)
    w = as_weights(occupancy)
    return float(sum(w[s] * kl_divergence(p[s], q[s]) for s in np.flatnonzero(w > 0)))
