import numpy as np
import pytest
from hypothesis import given, strategies as st

from ottrpo.advantage import (
    GaeConfig,
    TdConfig,
    advantage_from_q,
    discounted_returns,
    fit_linear_value,
    gae_advantages,
    td_q_values,
)
from ottrpo.continuous import ContTrajectory, polynomial_features
from ottrpo.mdp import Trajectory, random_policy


def traj(steps):
    s, a, r, s2, a2, d = map(np.array, zip(*steps))
    return Trajectory(s, a, r.astype(float), s2, a2, d.astype(bool))


def test_td_single_pass_hand_values():
    # s0 -a0-> s1 -a1-> terminal; forward order means s0 bootstraps from Q(s1, a1) = 0.
    t = traj([(0, 0, -1.0, 1, 1, False), (1, 1, -2.0, 2, -1, True)])
    q = td_q_values([t], 3, 2, TdConfig(0.5, 0.9))
    np.testing.assert_allclose(q, [[-0.5, 0], [0, -1.0], [0, 0]])
    q2 = td_q_values([t], 3, 2, TdConfig(0.5, 0.9), q_init=q)
    assert q2[0, 0] == pytest.approx(0.5 * -0.5 + 0.5 * (-1 + 0.9 * -1.0))


def test_td_no_bootstrap_after_step_cap():
    t = traj([(0, 0, -1.0, 0, 0, False), (0, 0, -1.0, 0, -1, False)])
    q = td_q_values([t], 1, 1, TdConfig(1.0, 0.5))
    assert q[0, 0] == -1.0
    with pytest.raises(ValueError):
        td_q_values([], 1, 1, TdConfig())
    with pytest.raises(ValueError):
        TdConfig(1.5, 0.5)


@given(st.integers(0, 10_000))
def test_advantage_has_zero_policy_mean(seed):
    rng = np.random.default_rng(seed)
    pol = random_policy(4, 3, rng)
    adv = advantage_from_q(rng.normal(size=(4, 3)), pol)
    np.testing.assert_allclose((pol.probs * adv).sum(axis=1), 0, atol=1e-12)


def test_gae_limits():
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=12), rng.normal(size=12)
    g = 0.9
    mc = gae_advantages(r, v, GaeConfig(g, 1.0))
    np.testing.assert_allclose(mc, discounted_returns(r, g) - v, atol=1e-12)
    td = gae_advantages(r, v, GaeConfig(g, 0.0))
    np.testing.assert_allclose(td, r + g * np.append(v[1:], 0) - v, atol=1e-12)
    with pytest.raises(ValueError):
        gae_advantages(r, v[:-1], GaeConfig())


def test_discounted_returns_bootstrap():
    np.testing.assert_allclose(discounted_returns([1, 1], 0.5, bootstrap=4), [2.5, 3.0])


def test_linear_value_recovers_exact_fit_and_falls_back_to_ridge():
    # Single-step episodes: return equals reward, so a quadratic is fit exactly.
    phi = polynomial_features(2)
    xs = np.linspace(-1, 1, 9)
    trajs = [ContTrajectory(np.array([x]), np.zeros(1), np.array([1 - 2 * x + 3 * x * x])) for x in xs]
    vf = fit_linear_value(trajs, phi, 0.99)
    np.testing.assert_allclose(vf.coef_, [1, -2, 3], atol=1e-10)
    tiny = fit_linear_value(trajs[:1], phi, 0.99)
    assert np.isfinite(tiny.coef_).all()
    assert tiny(np.array([xs[0]]))[0] == pytest.approx(trajs[0].rewards[0], abs=1e-6)


def test_gae_three_step_hand_unroll():
    adv = gae_advantages([1.0, 0.0, 1.0], [0.5, 0.2, 0.1], GaeConfig(0.9, 0.5))
    np.testing.assert_allclose(adv, [0.81275, 0.295, 0.9], atol=1e-12)


def test_constant_returns_give_constant_predictor():
    trajs = [ContTrajectory(np.array([x]), np.zeros(1), np.array([2.0])) for x in (-0.5, 0.1, 0.7)]
    vf = fit_linear_value(trajs, polynomial_features(0), 0.9)
    np.testing.assert_allclose(vf(np.array([0.3, -1.0])), 2.0)


def test_value_residual_shrinks_with_feature_degree():
    from ottrpo.continuous import ContToyEnv, GaussianLinearPolicy, collect

    trajs = collect(ContToyEnv(), GaussianLinearPolicy.zeros(), 20, np.random.default_rng(0))
    s = np.concatenate([t.states for t in trajs])
    y = np.concatenate([discounted_returns(t.rewards, 0.99) for t in trajs])
    sse = [np.sum((fit_linear_value(trajs, polynomial_features(d), 0.99)(s) - y) ** 2) for d in (0, 1, 2)]
    assert sse[0] >= sse[1] >= sse[2]
    assert sse[2] < sse[0]


def test_td_single_terminal_transition_and_zero_rate():
    from ottrpo.advantage import td_advantage

    pol = np.array([[0.25, 0.75]])
    t = traj([(0, 0, 2.0, 0, -1, True)])
    adv = td_advantage([t], pol, TdConfig(1.0, 0.5))
    np.testing.assert_allclose(adv, [[2.0 * 0.75, -2.0 * 0.25]])
    np.testing.assert_array_equal(td_advantage([t], pol, TdConfig(0.0, 0.5)), 0.0)


def test_td_advantage_on_chain_matches_exact():
    from ottrpo.advantage import td_advantage
    from ottrpo.envs import build_two_action_chain, chain_policy
    from ottrpo.mdp import evaluate_exact, rollout

    mdp, pol = build_two_action_chain(), chain_policy(0.5)
    trajs = rollout(mdp, pol, 10_000, rng_seed=0)
    adv = td_advantage(trajs, pol, TdConfig(0.9, 0.5))
    np.testing.assert_allclose(adv[0], evaluate_exact(mdp, pol).advantage[0], atol=0.05)
    np.testing.assert_allclose(adv[0], [-1.0, 1.0], atol=0.05)


def test_gae_with_exact_values_is_unbiased():
    from ottrpo.envs import build_two_action_chain, chain_policy
    from ottrpo.mdp import evaluate_exact, rollout

    mdp, pol = build_two_action_chain(), chain_policy(0.3)
    ev = evaluate_exact(mdp, pol)
    trajs = rollout(mdp, pol, 2000, rng_seed=1)
    cfg = GaeConfig(mdp.discount, 1.0)
    sums = np.zeros((3, 2))
    counts = np.zeros((3, 2))
    for t in trajs:
        a_hat = gae_advantages(t.rewards, ev.v[t.states], cfg)
        np.add.at(sums, (t.states, t.actions), a_hat)
        np.add.at(counts, (t.states, t.actions), 1)
    seen = counts > 0
    np.testing.assert_allclose((sums / np.maximum(counts, 1))[seen], ev.advantage[seen], atol=0.05)
