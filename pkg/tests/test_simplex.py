import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from ottrpo.simplex import linprog_max, linprog_min


def test_textbook_maximisation():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    res = linprog_max([3, 5], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18])
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, [2, 6], atol=1e-12)
    assert res.fun == pytest.approx(36)


def test_infeasible_and_unbounded():
    assert linprog_min([1.0], A_eq=[[1.0]], b_eq=[-1.0]).status == "infeasible"
    assert linprog_min([-1.0], A_ub=[[-1.0]], b_ub=[0.0]).status == "unbounded"


def test_redundant_equalities_are_dropped():
    res = linprog_min([1, 2], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert res.status == "optimal" and res.fun == pytest.approx(1.0)


@given(st.integers(0, 100_000))
def test_matches_scipy_on_random_feasible_programs(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = int(rng.integers(2, 7)), int(rng.integers(0, 4)), int(rng.integers(0, 3))
    x0 = rng.uniform(0, 1, n)  # guarantees feasibility
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.uniform(0, 1, m_ub)
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    # Box the variables so the program is bounded.
    A_ub = np.vstack([A_ub, np.eye(n)])
    b_ub = np.concatenate([b_ub, np.full(n, 2.0)])
    c = rng.normal(size=n)
    ours = linprog_min(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if m_eq else None, b_eq=b_eq if m_eq else None)
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if m_eq else None, b_eq=b_eq if m_eq else None, method="highs")
    assert ours.status == "optimal"
    assert ours.fun == pytest.approx(ref.fun, abs=1e-7)
    assert np.all(ours.x >= -1e-9)
    assert np.all(A_ub @ ours.x <= b_ub + 1e-7)
