"""Numerical verification suites for the dual solver and the closed-form update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import CHAIN_LEFT, build_two_action_chain, chain_policy
from .mdp import OccupancyMeasure, TabularPolicy, evaluate_exact, occupancy_exact, random_mdp, random_policy
from .oracle import certify, solve_primal_lp
from .transport import CostMatrix, binary_cost
from .trust_region import (
    dual_objective,
    improvement_certificate,
    improvement_lower_bound,
    phi_table,
    solve_dual,
    update_policy_discrete,
)

SCOPES = ("all", "golden", "duality", "feasibility", "improvement", "convexity")
EPSILONS = tuple(np.round(np.arange(0.05, 0.501, 0.05), 2))
GOLDEN_TOL = 1e-9
FEASIBILITY_TOL = 1e-7
DUALITY_RTOL = 1e-6
DERIVATIVE_TOL = 1e-6
CONVEXITY_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float = 0.0
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: worst={self.worst:.3e}{extra}"


@dataclass(frozen=True, eq=False)
class Instance:
    policy: TabularPolicy
    occupancy: OccupancyMeasure
    advantage: np.ndarray
    cost: CostMatrix
    epsilon: float


def random_instance(rng, max_states=4, max_actions=4) -> Instance:
    """Small dense instance: A ~ U[-1, 1], costs ~ U[0.1, 1] off the diagonal."""
    n_s = int(rng.integers(1, max_states + 1))
    n_a = int(rng.integers(2, max_actions + 1))
    probs = rng.dirichlet(np.ones(n_a), size=n_s)
    # Some rows deterministic so degenerate supports are exercised too.
    for i in np.flatnonzero(rng.random(n_s) < 0.25):
        probs[i] = np.eye(n_a)[rng.integers(n_a)]
    c = rng.uniform(0.1, 1.0, size=(n_a, n_a))
    np.fill_diagonal(c, 0.0)
    return Instance(
        TabularPolicy(probs),
        OccupancyMeasure(rng.dirichlet(np.ones(n_s))),
        rng.uniform(-1.0, 1.0, size=(n_s, n_a)),
        CostMatrix(c),
        float(rng.choice(EPSILONS)),
    )


def example_one(epsilon=0.3) -> Instance:
    """One state, ``pi = delta_{a1}``, ``A = (0, 1)``, binary cost."""
    return Instance(
        TabularPolicy([[1.0, 0.0]]), OccupancyMeasure([1.0]), np.array([[0.0, 1.0]]), binary_cost(2), epsilon
    )


def chain_instance(theta, epsilon) -> Instance:
    """The two-action chain with its exact advantage; ``rho(s0) = 1``."""
    mdp = build_two_action_chain()
    policy = TabularPolicy(chain_policy(theta))
    return Instance(
        policy,
        occupancy_exact(mdp, policy),
        evaluate_exact(mdp, policy).advantage,
        binary_cost(2),
        epsilon,
    )


def _step(inst: Instance, mass_splitting=True):
    dual = solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon)
    return dual, update_policy_discrete(inst.policy, dual, mass_splitting=mass_splitting)


def _close(name, got, want, tol=GOLDEN_TOL):
    err = float(np.max(np.abs(np.asarray(got, float) - np.asarray(want, float))))
    return CheckResult(name, err <= tol, err)


def golden_suite(mass_splitting=True):
    out = []
    eps = 0.3
    inst = example_one(eps)
    dual, rep = _step(inst, mass_splitting)
    out += [
        _close("example1 lambda*", dual.lambda_star, 1.0),
        _close("example1 t*", dual.t_star, 1 - eps),
        _close("example1 new policy", rep.new_policy.probs[0], [1 - eps, eps]),
        _close("example1 primal=dual=eps", [rep.primal_value, rep.dual_value], [eps, eps]),
        CheckResult("example1 feasible", rep.achieved_discrepancy <= eps + FEASIBILITY_TOL, max(rep.achieved_discrepancy - eps, 0.0)),
    ]
    for theta, eps in ((0.5, 0.1), (0.3, 0.25), (0.05, 0.1)):
        dual, rep = _step(chain_instance(theta, eps), mass_splitting)
        want_lam = 2.0 if theta >= eps else 0.0
        out += [
            _close(f"chain theta={theta} eps={eps} lambda*", dual.lambda_star, want_lam),
            _close(f"chain theta={theta} eps={eps} new pi(L)", rep.new_policy.probs[0, CHAIN_LEFT], max(theta - eps, 0.0)),
        ]
    mdp = build_two_action_chain()
    policy = TabularPolicy(chain_policy(1.0))
    n = 0
    while policy.probs[0, CHAIN_LEFT] > GOLDEN_TOL and n < 10:
        inst = Instance(policy, occupancy_exact(mdp, policy), evaluate_exact(mdp, policy).advantage, binary_cost(2), 0.25)
        policy = _step(inst, mass_splitting)[1].new_policy
        n += 1
    out.append(CheckResult("chain converges in ceil(1/eps)=4 updates", n == 4 and policy.probs[0, CHAIN_LEFT] <= GOLDEN_TOL, abs(n - 4)))
    return out


def duality_suite(n=100, seed=0, mass_splitting=True):
    rng = np.random.default_rng(seed)
    worst_gap = worst_update = 0.0
    failures = 0
    for _ in range(n):
        inst = random_instance(rng)
        dual, rep = _step(inst, mass_splitting)
        cert = certify(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon, dual, rep, rtol=DUALITY_RTOL)
        scale = 1.0 + abs(cert.lp_value)
        worst_gap = max(worst_gap, cert.duality_gap / scale)
        worst_update = max(worst_update, cert.update_gap / scale)
        failures += not cert.ok
    return [
        CheckResult("LP primal vs dual G(lambda*)", worst_gap <= DUALITY_RTOL, worst_gap, f"{n} instances"),
        CheckResult("update attains LP optimum", worst_update <= DUALITY_RTOL and failures == 0, worst_update, f"{failures} failures"),
    ]


def feasibility_suite(n=100, seed=1, mass_splitting=True):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n):
        inst = random_instance(rng)
        rep = _step(inst, mass_splitting)[1]
        worst = max(worst, rep.achieved_discrepancy - inst.epsilon)
    out = [CheckResult("average OT discrepancy <= eps + 1e-7", worst <= FEASIBILITY_TOL, max(worst, 0.0), f"{n} instances")]
    # Example 1 against the LP optimum: without splitting the update is either
    # suboptimal or infeasible.
    inst = example_one()
    rep = _step(inst, mass_splitting)[1]
    lp = solve_primal_lp(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon)
    feasible = rep.achieved_discrepancy <= inst.epsilon + FEASIBILITY_TOL
    optimal = abs(rep.primal_value - lp.value) <= DUALITY_RTOL * (1 + abs(lp.value))
    out.append(
        CheckResult(
            "example1 update feasible and optimal",
            feasible and optimal,
            abs(rep.primal_value - lp.value),
            f"feasible={feasible} optimal={optimal}",
        )
    )
    return out


def improvement_suite(n=100, seed=2, mass_splitting=True):
    rng = np.random.default_rng(seed)
    worst_gain = worst_bound = np.inf
    for _ in range(n):
        n_s, n_a = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        mdp = random_mdp(n_s, n_a, float(rng.uniform(0.5, 0.95)), rng)
        policy = random_policy(n_s, n_a, rng)
        c = binary_cost(n_a) if rng.random() < 0.5 else CostMatrix(np.where(np.eye(n_a) > 0, 0.0, rng.uniform(0.1, 1.0, (n_a, n_a))))
        inst = Instance(policy, occupancy_exact(mdp, policy), evaluate_exact(mdp, policy).advantage, c, float(rng.choice(EPSILONS)))
        rep = _step(inst, mass_splitting)[1]
        gain = improvement_certificate(mdp, policy, rep)
        bound = improvement_lower_bound(mdp, policy, rep, c)
        worst_gain = min(worst_gain, gain)
        worst_bound = min(worst_bound, gain - bound)
    return [
        CheckResult("J(new) - J(old) >= -1e-7", worst_gain >= -1e-7, worst_gain, f"{n} MDPs"),
        CheckResult("gain >= lam*/(1-gamma) * avg OT under rho_new - 1e-6", worst_bound >= -1e-6, worst_bound),
    ]


def _breakpoints(inst: Instance):
    """Every ``lam >= 0`` where two lines ``A(s, k) - lam c(a, k)`` cross, over all (s, a, k, k')."""
    adv, c = inst.advantage, inst.cost.c
    num = adv[:, None, None, :] - adv[:, None, :, None]  # (s, 1, k, k')
    den = c[None, :, None, :] - c[None, :, :, None]  # (1, a, k, k')
    num, den = np.broadcast_arrays(num, den)
    mask = den > 0
    lams = num[mask] / den[mask]
    return lams[lams >= 0]


def _one_sided_slopes(inst: Instance, lam, h):
    g = lambda x: dual_objective(x, inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon)
    right = (g(lam + h) - g(lam)) / h
    left = (g(lam) - g(lam - h)) / h if lam - h >= 0 else None
    return left, right


def convexity_suite(n=50, seed=3):
    rng = np.random.default_rng(seed)
    worst_convex = worst_mono = worst_bound = worst_deriv = 0.0
    for _ in range(n):
        inst = random_instance(rng)
        g = lambda x: dual_objective(x, inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon)
        for _ in range(20):
            l1, l2 = np.sort(rng.uniform(0.0, 5.0, 2))
            worst_convex = max(worst_convex, g(0.5 * (l1 + l2)) - 0.5 * (g(l1) + g(l2)))
            p1, p2 = phi_table(l1, inst.advantage, inst.cost), phi_table(l2, inst.advantage, inst.cost)
            worst_mono = max(worst_mono, float((p2 - p1).max()))
            worst_bound = max(worst_bound, float(np.abs(p1).max() - np.abs(inst.advantage).max()))
        dual = solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon)
        lam = dual.lambda_star
        # Keep the step inside the linear pieces adjacent to lam*.
        others = np.abs(_breakpoints(inst) - lam)
        others = others[others > 1e-9]
        h = min(1e-6, 0.25 * others.min()) if others.size else 1e-6
        left, right = _one_sided_slopes(inst, lam, h)
        worst_deriv = max(worst_deriv, abs(right - (inst.epsilon - dual.c_under)))
        if left is not None and lam > 0:
            worst_deriv = max(worst_deriv, abs(left - (inst.epsilon - dual.c_over)))
    return [
        CheckResult("G midpoint convexity", worst_convex <= CONVEXITY_TOL, max(worst_convex, 0.0), f"{n} instances"),
        CheckResult("Phi non-increasing in lambda", worst_mono <= CONVEXITY_TOL, max(worst_mono, 0.0)),
        CheckResult("|Phi| <= max |A|", worst_bound <= CONVEXITY_TOL, max(worst_bound, 0.0)),
        CheckResult("one-sided slopes eps - c_under / eps - c_over", worst_deriv <= DERIVATIVE_TOL, worst_deriv),
    ]


def run_suites(scope="all", n=100, seed=0, mass_splitting=True):
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}")
    results = []
    if scope in ("all", "golden"):
        results += golden_suite(mass_splitting)
    if scope in ("all", "duality"):
        results += duality_suite(n, seed, mass_splitting)
    if scope in ("all", "feasibility"):
        results += feasibility_suite(n, seed + 1, mass_splitting)
    if scope in ("all", "improvement"):
        results += improvement_suite(n, seed + 2, mass_splitting)
    if scope in ("all", "convexity"):
        results += convexity_suite(max(1, n // 2), seed + 3)
    return results
