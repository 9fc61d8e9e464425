"""Optimal-transport trust-region update for finite action sets.

The trust-region problem

    max_{new}  sum_s rho(s) sum_a new(a|s) A(s, a)
    s.t.       sum_s rho(s) OT_c(old(.|s), new(.|s)) <= eps

is solved through its one-dimensional dual

    G(lam) = lam * eps + sum_s rho(s) sum_a old(a|s) Phi_lam(s, a),
    Phi_lam(s, a) = max_{a'} A(s, a') - lam * c(a, a'),

which is convex and piecewise linear in ``lam``. Its minimiser ``lam*`` fixes,
for every (s, a), the set of regularised-advantage maximizers; the optimal
update moves the mass of ``a`` to the nearest and the furthest maximizer with
weights ``t*`` and ``1 - t*`` so that the constraint is met with equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mdp import TabularMdp, TabularPolicy, discounted_visitation, evaluate_exact
from .scalar import golden_section
from .transport import ot_discrepancy
from .validation import (
    as_probs,
    as_weights,
    check_advantage,
    check_cost_matrix,
    check_epsilon,
)

MEMBERSHIP_ATOL = 1e-9
# Slack on the optimality check c_under <= eps <= c_over.
KKT_ATOL = 1e-12
CANDIDATE_BUDGET = 4096
_CHUNK = 2_000_000


class StaleDualError(ValueError):
    """The dual solution was computed for a different policy."""


def membership_tolerance(value):
    return MEMBERSHIP_ATOL * (1.0 + np.abs(value))


@dataclass(frozen=True)
class RegularizedAdvantage:
    value: float
    maximizers: tuple
    membership_tolerance: float


def regularized_advantage(lam, s, a, advantage, cost, tol=None) -> RegularizedAdvantage:
    """``Phi_lam(s, a)`` together with its maximizer set ``D_lam(s, a)``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    c = check_cost_matrix(cost)
    adv = np.asarray(advantage, float)
    scores = adv[s] - lam * c[a]
    value = float(scores.max())
    tol = float(membership_tolerance(value)) if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("membership tolerance must be positive")
    members = tuple(int(k) for k in np.flatnonzero(np.abs(scores - value) <= tol))
    return RegularizedAdvantage(value, members, tol)


def phi_table(lam, advantage, cost):
    """``Phi_lam`` for every (state, action) pair, shape ``(S, A)``."""
    adv = np.asarray(advantage, float)
    c = np.asarray(cost, float)
    return (adv[:, None, :] - lam * c[None, :, :]).max(axis=2)


def dual_objective(lam, policy, occupancy, advantage, cost, epsilon) -> float:
    """``G(lam) = lam * eps + sum_i rho_i sum_j pi_ij Phi_lam(s_i, a_j)``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    probs = as_probs(policy)
    w = as_weights(occupancy)
    adv = check_advantage(advantage, *probs.shape)
    c = check_cost_matrix(cost, probs.shape[1])
    return float(lam * epsilon + np.sum(w[:, None] * probs * phi_table(lam, adv, c)))


@dataclass(frozen=True, eq=False)
class DualSolution:
    lambda_star: float
    dual_value: float
    b_under: np.ndarray
    b_over: np.ndarray
    c_under: float
    c_over: float
    t_star: float
    epsilon: float
    n_candidates: int = 0
    # Problem data the solution belongs to; used by the update and the audits.
    policy: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)
    advantage: np.ndarray = field(default=None, repr=False)
    cost: np.ndarray = field(default=None, repr=False)


class _ActiveProblem:
    """The (state, action) pairs with positive weight ``rho_i * pi_ij``."""

    def __init__(self, probs, w, adv, c, epsilon):
        weight = w[:, None] * probs
        self.rows, self.cols = np.nonzero(weight > 0)
        self.weight = weight[self.rows, self.cols]
        self.adv = adv[self.rows]  # (n, K)
        self.cost = c[self.cols]  # (n, K)
        self.epsilon = epsilon

    def G(self, lams):
        lams = np.atleast_1d(np.asarray(lams, float))
        out = np.empty(lams.size)
        n, k = self.adv.shape
        step = max(1, _CHUNK // max(1, n * k))
        for lo in range(0, lams.size, step):
            lam = lams[lo:lo + step, None, None]
            phi = (self.adv[None] - lam * self.cost[None]).max(axis=2)
            out[lo:lo + step] = lams[lo:lo + step] * self.epsilon + phi @ self.weight
        return out

    def breakpoints(self):
        """Every positive ``lam`` where two lines ``A(s,k) - lam c(a,k)`` intersect, plus 0."""
        num = self.adv[:, None, :] - self.adv[:, :, None]
        den = self.cost[:, None, :] - self.cost[:, :, None]
        mask = (den > 0) & (num > 0)
        lams = num[mask] / den[mask]
        return np.unique(np.concatenate([[0.0], lams]))


def _argmin_sorted_convex(problem, lams):
    """Smallest minimiser of G over the sorted candidate grid, by bisection on increments."""
    lo, hi = 0, lams.size - 1
    cache = {}

    def g(i):
        if i not in cache:
            cache[i] = problem.G(lams[i])[0]
        return cache[i]

    # First index i with G(i + 1) - G(i) >= -tol; increments of a convex sequence are monotone.
    while lo < hi:
        mid = (lo + hi) // 2
        gm, gn = g(mid), g(mid + 1)
        if gn - gm >= -1e-12 * (1.0 + abs(gm)):
            hi = mid
        else:
            lo = mid + 1
    return lo, g(lo)


def solve_dual(
    policy,
    occupancy,
    advantage,
    cost,
    epsilon,
    method="breakpoints",
    candidate_budget=CANDIDATE_BUDGET,
) -> DualSolution:
    """Minimise ``G`` over ``lam >= 0`` exactly and build the transport selections.

    ``method="breakpoints"`` evaluates G at every breakpoint when there are at
    most ``candidate_budget`` of them and otherwise bisects over the sorted
    breakpoints (G restricted to them is a convex sequence). ``method="golden"``
    runs a golden-section search and snaps the result to the best nearby
    breakpoint.
    """
    epsilon = check_epsilon(epsilon)
    probs = as_probs(policy)
    w = as_weights(occupancy)
    n_states, n_actions = probs.shape
    if w.shape != (n_states,):
        raise ValueError("occupancy length does not match the policy")
    adv = check_advantage(advantage, n_states, n_actions)
    c = check_cost_matrix(cost, n_actions)

    problem = _ActiveProblem(probs, w, adv, c, epsilon)
    lams = problem.breakpoints()
    if method == "breakpoints":
        if lams.size <= candidate_budget:
            values = problem.G(lams)
            best = values.min()
            idx = int(np.flatnonzero(values <= best + 1e-12 * (1.0 + abs(best)))[0])
            lam_star, g_star = float(lams[idx]), float(values[idx])
        else:
            idx, g_star = _argmin_sorted_convex(problem, lams)
            lam_star = float(lams[idx])
    elif method == "golden":
        spread = adv.max() - adv.min()
        positive = c[c > 0]
        lam_max = spread / positive.min() if positive.size and spread > 0 else 0.0
        lam_g, _ = golden_section(lambda x: problem.G(x)[0], 0.0, lam_max, tol=1e-12)
        pos = np.searchsorted(lams, lam_g)
        near = np.unique(lams[np.clip([pos - 1, pos, pos + 1], 0, lams.size - 1)])
        values = problem.G(near)
        best = int(np.argmin(values))
        idx = int(np.searchsorted(lams, near[best]))
        lam_star, g_star = float(near[best]), float(values[best])
    else:
        raise ValueError(f"unknown dual method {method!r}")

    cols = np.arange(n_actions)[None, :]
    weight = w[:, None] * probs

    def selections(lam):
        bu, bo = select_maps(lam, adv, c)
        return bu, bo, float(np.sum(weight * c[cols, bu])), float(np.sum(weight * c[cols, bo]))

    b_under, b_over, c_under, c_over = selections(lam_star)
    # Breakpoints closer together than the float resolution of G can leave the
    # chosen candidate one step off the minimiser. Optimality means
    # c_under <= eps <= c_over (the right slope is >= 0, the left slope <= 0),
    # so walk along the sorted candidates until that holds.
    direction = 1 if c_under > epsilon + KKT_ATOL else (-1 if lam_star > 0 and c_over < epsilon - KKT_ATOL else 0)
    while direction:
        nxt = idx + direction
        if not 0 <= nxt < lams.size:
            break
        idx = nxt
        lam_star = float(lams[idx])
        b_under, b_over, c_under, c_over = selections(lam_star)
        if (direction > 0 and c_under <= epsilon + KKT_ATOL) or (direction < 0 and (lam_star == 0 or c_over >= epsilon - KKT_ATOL)):
            break
    if direction:
        g_star = float(problem.G(lam_star)[0])
    if lam_star > 0 and c_over - c_under > 1e-15:
        t_star = float(np.clip((c_over - epsilon) / (c_over - c_under), 0.0, 1.0))
    else:
        # lam* = 0: all mass to the nearest maximizer (feasible by the right-slope condition).
        t_star = 1.0
    return DualSolution(
        lambda_star=lam_star,
        dual_value=g_star,
        b_under=b_under,
        b_over=b_over,
        c_under=c_under,
        c_over=c_over,
        t_star=t_star,
        epsilon=epsilon,
        n_candidates=int(lams.size),
        policy=probs,
        weights=w,
        advantage=adv,
        cost=c,
    )


def select_maps(lam, advantage, cost):
    """Nearest and furthest maximizers of ``Phi_lam`` for every (s, a); ties -> lowest index."""
    adv = np.asarray(advantage, float)
    c = np.asarray(cost, float)
    scores = adv[:, None, :] - lam * c[None, :, :]
    phi = scores.max(axis=2, keepdims=True)
    member = scores >= phi - membership_tolerance(phi)
    cc = np.broadcast_to(c[None, :, :], scores.shape)
    b_under = np.where(member, cc, np.inf).argmin(axis=2)
    b_over = np.where(member, cc, -np.inf).argmax(axis=2)
    return b_under, b_over


@dataclass(frozen=True, eq=False)
class UpdateReport:
    new_policy: TabularPolicy
    surrogate_gain: float
    primal_value: float
    dual_value: float
    achieved_discrepancy: float
    lambda_star: float
    t_star: float
    epsilon: float

    @property
    def duality_gap(self) -> float:
        return abs(self.primal_value - self.dual_value)

    @property
    def feasible(self) -> bool:
        return self.achieved_discrepancy <= self.epsilon + 1e-7

    @property
    def strong_duality(self) -> bool:
        return self.duality_gap <= 1e-7 * (1.0 + abs(self.dual_value))


def push_forward(probs, b_under, b_over, t_star):
    """``new(.|s_i) = sum_j pi_ij (t delta_{b_under[i,j]} + (1 - t) delta_{b_over[i,j]})``."""
    n_states, n_actions = probs.shape
    new = np.zeros_like(probs)
    rows = np.repeat(np.arange(n_states), n_actions)
    np.add.at(new, (rows, b_under.ravel()), t_star * probs.ravel())
    np.add.at(new, (rows, b_over.ravel()), (1.0 - t_star) * probs.ravel())
    return new


def achieved_discrepancy(old, new, weights, cost) -> float:
    """Occupancy-weighted exact OT between the rows of ``old`` and ``new``."""
    total = 0.0
    for s in np.flatnonzero(weights > 0):
        if not np.array_equal(old[s], new[s]):
            total += weights[s] * ot_discrepancy(old[s], new[s], cost)
    return float(total)


def update_policy_discrete(policy, dual: DualSolution, mass_splitting=True, audit=True) -> UpdateReport:
    """Closed-form optimal update from a dual solution.

    ``mass_splitting=False`` forces ``b_over = b_under`` (single transport map),
    which is kept only to demonstrate why splitting is needed.
    """
    probs = as_probs(policy)
    if dual.policy is None or probs.shape != dual.policy.shape or not np.array_equal(probs, dual.policy):
        raise StaleDualError("dual solution was computed for a different policy")
    b_over = dual.b_over if mass_splitting else dual.b_under
    new = push_forward(probs, dual.b_under, b_over, dual.t_star)
    # Remove float dust so rows stay exactly stochastic.
    new = np.clip(new, 0.0, None)
    new /= new.sum(axis=1, keepdims=True)
    primal = float(np.sum(dual.weights[:, None] * new * dual.advantage))
    disc = achieved_discrepancy(probs, new, dual.weights, dual.cost) if audit else float("nan")
    return UpdateReport(
        new_policy=TabularPolicy(new),
        surrogate_gain=primal,
        primal_value=primal,
        dual_value=dual.dual_value,
        achieved_discrepancy=disc,
        lambda_star=dual.lambda_star,
        t_star=dual.t_star,
        epsilon=dual.epsilon,
    )


def ot_trust_region_step(policy, occupancy, advantage, cost, epsilon, **kwargs):
    """``solve_dual`` followed by ``update_policy_discrete``; returns ``(dual, report)``."""
    dual = solve_dual(policy, occupancy, advantage, cost, epsilon)
    return dual, update_policy_discrete(policy, dual, **kwargs)


def improvement_certificate(mdp: TabularMdp, old_policy, report: UpdateReport, advantage_exact=None) -> float:
    """Exact ``J(new) - J(old)``."""
    del advantage_exact  # the exact evaluation below is the certificate
    old_j = evaluate_exact(mdp, old_policy).expected_return
    new_j = evaluate_exact(mdp, report.new_policy).expected_return
    return new_j - old_j


def improvement_lower_bound(mdp: TabularMdp, old_policy, report: UpdateReport, cost) -> float:
    """``lam* / (1 - gamma) * sum_s rho_new(s) OT(old(.|s), new(.|s))`` with ``rho_new`` normalised.

    Computed as ``lam* * sum_s d_new(s) OT(s)`` with the unnormalised
    visitation ``d_new``, which is the same number.
    """
    old, new = as_probs(old_policy), as_probs(report.new_policy)
    d_new = discounted_visitation(mdp, new)
    total = 0.0
    for s in np.flatnonzero(d_new > 0):
        if not np.array_equal(old[s], new[s]):
            total += d_new[s] * ot_discrepancy(old[s], new[s], cost)
    return report.lambda_star * total
