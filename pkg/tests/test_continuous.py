import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from ottrpo.continuous import (
    ContinuousConfig,
    ContToyEnv,
    GaussianBatch,
    GaussianLinearPolicy,
    collect,
    eval_G_gaussian,
    gaussian_trust_proxy,
    policy_gradient_update,
    polynomial_features,
    regularized_gradient,
    regularized_objective,
    solve_dual_gaussian,
    train_continuous,
)


def random_batch(rng, n=40):
    return GaussianBatch(rng.uniform(-1, 1, n), rng.normal(size=n), rng.normal(size=n))


def const_mean(value):
    return lambda s: np.full(np.shape(s), value, float)


def test_env_bounds_and_reward():
    env = ContToyEnv()
    x, r = env.step(np.array([0.95, -0.5]), np.array([3.0, 0.2]))
    np.testing.assert_allclose(x, [1.0, -0.48])
    np.testing.assert_allclose(r, [-(0.95 ** 2 + 0.01), -(0.25 + 0.01 * 0.04)])
    trajs = collect(env, GaussianLinearPolicy.zeros(), 5, np.random.default_rng(0))
    assert all(len(t) == 50 and np.abs(t.states).max() <= 1 for t in trajs)


def test_sampling_is_seeded():
    pol = GaussianLinearPolicy([0.1, -0.3], log_std=-1.0)
    a = pol.sample(np.linspace(-1, 1, 5), np.random.default_rng(3))
    b = pol.sample(np.linspace(-1, 1, 5), np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_single_sample_dual():
    batch = GaussianBatch([0.0], [np.sqrt(0.5)], [1.0])
    g = lambda lam: eval_G_gaussian(lam, batch, const_mean(0.0), 0.2)
    assert g(0.0) == pytest.approx(1.0)
    assert g(2.0) == pytest.approx(0.4)
    assert g(1e6) == pytest.approx(0.2e6)
    assert solve_dual_gaussian(batch, const_mean(0.0), 0.2) == pytest.approx(2.0, abs=1e-6)


def test_dual_degenerate_cases():
    neg = GaussianBatch([0.0, 0.5], [1.0, 1.0], [-1.0, 0.0])
    assert solve_dual_gaussian(neg, const_mean(0.0), 0.1) == 0.0
    loose = GaussianBatch([0.0], [0.1], [1.0])
    assert solve_dual_gaussian(loose, const_mean(0.0), 0.5) == 0.0
    with pytest.raises(ValueError):
        GaussianBatch([], [], [])


@given(st.integers(0, 100_000), st.floats(0, 20), st.floats(0, 20))
def test_G_is_convex_in_lambda(seed, l1, l2):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng)
    mean = GaussianLinearPolicy(rng.normal(size=2)).mean
    g = lambda lam: eval_G_gaussian(lam, batch, mean, 0.05)
    assert g((l1 + l2) / 2) <= (g(l1) + g(l2)) / 2 + 1e-10


@given(st.integers(0, 100_000))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng)
    pol = GaussianLinearPolicy.zeros(2)
    w = rng.normal(size=3)
    lam = rng.uniform(0.1, 5)
    grad = regularized_gradient(w, pol, batch, lam)
    h = 1e-5
    fd = np.array([
        (regularized_objective(w + h * e, pol, batch, lam) - regularized_objective(w - h * e, pol, batch, lam)) / (2 * h)
        for e in np.eye(3)
    ])
    # Kinks of max{., 0} within h of w break the central difference; skip those draws.
    m = pol.features(batch.states) @ w
    margin = np.abs(batch.advantages - lam * (m - batch.actions) ** 2)
    if margin.min() < 1e-3:
        return
    assert np.linalg.norm(grad - fd) <= 1e-4 * max(np.linalg.norm(fd), 1e-8)


def test_equal_covariance_w2_identity():
    # Quantile coupling gives the exact W2 in one dimension.
    sigma, m1, m2 = 0.7, 0.3, -0.4
    u = (np.arange(200_000) + 0.5) / 200_000
    w2 = np.mean((norm.ppf(u, m1, sigma) - norm.ppf(u, m2, sigma)) ** 2)
    assert w2 == pytest.approx((m1 - m2) ** 2, rel=1e-9)
    old = GaussianLinearPolicy([m1, 0.0], np.log(sigma))
    new = GaussianLinearPolicy([m2, 0.0], np.log(sigma))
    assert gaussian_trust_proxy(old, new, np.linspace(-1, 1, 7)) == pytest.approx(w2, rel=1e-9)
    assert gaussian_trust_proxy(old, old, np.zeros(3)) == 0.0


def test_update_edge_cases():
    pol = GaussianLinearPolicy.zeros()
    batch = GaussianBatch([0.2], [0.8], [1.0])
    rep = policy_gradient_update(pol, batch, 0.0, 0.05, rng=0)
    np.testing.assert_array_equal(rep.policy.weights, pol.weights)
    from ottrpo.continuous import GradientConfig

    one = policy_gradient_update(pol, batch, 1.0, 10.0, GradientConfig(epochs=1), rng=0)
    before = abs(pol.mean([0.2])[0] - 0.8)
    after = abs(one.policy.mean([0.2])[0] - 0.8)
    assert after < before


@pytest.mark.parametrize("seed", range(3))
def test_training_respects_the_proxy_bound(seed):
    cfg = ContinuousConfig(cycles=5)
    res = train_continuous(cfg, seed=seed)
    assert max(res.proxies) <= 2 * cfg.epsilon
    assert len(res.returns) == cfg.cycles + 1
    again = train_continuous(cfg, seed=seed)
    assert again.returns == res.returns
