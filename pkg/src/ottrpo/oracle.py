"""Primal certification of the trust-region update by linear programming.

The trust-region problem over couplings is an ordinary LP: one plan
``gamma_i(j, k) >= 0`` per state with row sums ``pi_ij``, a single budget
row ``sum rho_i gamma_i(j, k) c(j, k) <= eps``, and the advantage of the
destination action as objective. It is solved here with the generic simplex
and compared with the dual route; none of the dual solver's code is used.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .simplex import linprog_max
from .validation import as_probs, as_weights, check_advantage, check_cost_matrix, check_epsilon

MAX_LP_VARIABLES = 400
CERT_RTOL = 1e-6


class LpBudgetExceeded(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PrimalLpSolution:
    value: float
    coupling: np.ndarray  # (S, A, A)
    policy: np.ndarray  # induced new policy, (S, A)


def solve_primal_lp(policy, occupancy, advantage, cost, epsilon, max_variables=MAX_LP_VARIABLES) -> PrimalLpSolution:
    probs = as_probs(policy)
    w = as_weights(occupancy)
    n_s, n_a = probs.shape
    adv = check_advantage(advantage, n_s, n_a)
    c = check_cost_matrix(cost, n_a)
    epsilon = check_epsilon(epsilon, allow_zero=True)
    n_var = n_s * n_a * n_a
    if n_var > max_variables:
        raise LpBudgetExceeded(f"LP has {n_var} variables, budget is {max_variables}")

    # Variable index: (i * n_a + j) * n_a + k
    objective = np.zeros((n_s, n_a, n_a))
    budget = np.zeros((n_s, n_a, n_a))
    for i in range(n_s):
        objective[i] = w[i] * np.broadcast_to(adv[i], (n_a, n_a))
        budget[i] = w[i] * c
    A_eq = np.zeros((n_s * n_a, n_var))
    for row in range(n_s * n_a):
        A_eq[row, row * n_a:(row + 1) * n_a] = 1.0
    res = linprog_max(
        objective.ravel(),
        A_ub=budget.reshape(1, -1),
        b_ub=[epsilon],
        A_eq=A_eq,
        b_eq=probs.ravel(),
    )
    if res.status != "optimal":
        # The identity coupling is always feasible and the objective is bounded.
        raise RuntimeError(f"certification LP ended with status {res.status}")
    coupling = res.x.reshape(n_s, n_a, n_a)
    return PrimalLpSolution(res.fun, coupling, coupling.sum(axis=1))


def constraint_residuals(sol: PrimalLpSolution, policy, occupancy, cost, epsilon):
    """Worst violations of the marginal, budget and sign constraints."""
    probs = as_probs(policy)
    w = as_weights(occupancy)
    c = np.asarray(cost, float)
    marg = np.abs(sol.coupling.sum(axis=2) - probs).max()
    spent = float(np.einsum("i,ijk,jk->", w, sol.coupling, c))
    return {
        "marginal": float(marg),
        "budget": max(0.0, spent - epsilon),
        "negativity": float(max(0.0, -sol.coupling.min())),
    }


@dataclass
class Certification:
    status: str  # "certified" | "failed" | "skipped"
    lp_value: Optional[float] = None
    dual_value: Optional[float] = None
    update_value: Optional[float] = None
    duality_gap: Optional[float] = None
    update_gap: Optional[float] = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "certified"


def certify(policy, occupancy, advantage, cost, epsilon, dual_solution, update_report, rtol=CERT_RTOL) -> Certification:
    """Compare the LP optimum with ``G(lam*)`` and with the value of the closed-form update."""
    try:
        lp = solve_primal_lp(policy, occupancy, advantage, cost, epsilon)
    except LpBudgetExceeded as exc:
        return Certification("skipped", reason=str(exc))
    dual_value = float(dual_solution.dual_value)
    update_value = float(update_report.primal_value)
    scale = 1.0 + abs(dual_value)
    gap = abs(lp.value - dual_value)
    ugap = abs(lp.value - update_value)
    ok = gap <= rtol * scale and ugap <= rtol * scale
    return Certification(
        "certified" if ok else "failed",
        lp_value=lp.value,
        dual_value=dual_value,
        update_value=update_value,
        duality_gap=gap,
        update_gap=ugap,
        reason="" if ok else "LP optimum differs from the dual or from the update",
    )
