import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from ottrpo.oracle import LpBudgetExceeded, certify, constraint_residuals, solve_primal_lp
from ottrpo.trust_region import solve_dual, update_policy_discrete
from ottrpo.verify import chain_instance, example_one, random_instance


def scipy_value(inst):
    """Same LP assembled independently and solved with HiGHS."""
    p, w, adv, c = inst.policy.probs, inst.occupancy.weights, inst.advantage, inst.cost.c
    n_s, n_a = p.shape
    obj, A_eq, b_eq = [], [], []
    for i in range(n_s):
        for j in range(n_a):
            row = np.zeros(n_s * n_a * n_a)
            row[(i * n_a + j) * n_a:(i * n_a + j + 1) * n_a] = 1
            A_eq.append(row)
            b_eq.append(p[i, j])
            obj.extend(w[i] * adv[i])
    budget = np.concatenate([w[i] * c.ravel() for i in range(n_s)])
    res = linprog(-np.array(obj), A_ub=[budget], b_ub=[inst.epsilon], A_eq=A_eq, b_eq=b_eq, method="highs")
    assert res.status == 0
    return -res.fun


def test_example_one_lp():
    inst = example_one(0.3)
    sol = solve_primal_lp(inst.policy, inst.occupancy, inst.advantage, inst.cost, 0.3)
    assert sol.value == pytest.approx(0.3)
    np.testing.assert_allclose(sol.policy, [[0.7, 0.3]], atol=1e-12)
    res = constraint_residuals(sol, inst.policy, inst.occupancy, inst.cost.c, 0.3)
    assert max(res.values()) <= 1e-12


@given(st.integers(0, 100_000))
def test_lp_matches_highs(seed):
    inst = random_instance(np.random.default_rng(seed))
    sol = solve_primal_lp(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon)
    assert sol.value == pytest.approx(scipy_value(inst), abs=1e-9)


def test_certify_chain_and_budget_skip():
    inst = chain_instance(0.5, 0.1)
    dual = solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, 0.1)
    rep = update_policy_discrete(inst.policy, dual)
    cert = certify(inst.policy, inst.occupancy, inst.advantage, inst.cost, 0.1, dual, rep)
    assert cert.ok and cert.lp_value == pytest.approx(0.2)
    with pytest.raises(LpBudgetExceeded):
        solve_primal_lp(inst.policy, inst.occupancy, inst.advantage, inst.cost, 0.1, max_variables=4)


def test_certify_flags_a_broken_update():
    inst = example_one(0.3)
    dual = solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, 0.3)
    rep = update_policy_discrete(inst.policy, dual, mass_splitting=False)
    cert = certify(inst.policy, inst.occupancy, inst.advantage, inst.cost, 0.3, dual, rep)
    assert cert.status == "failed" and cert.update_gap == pytest.approx(0.3)
