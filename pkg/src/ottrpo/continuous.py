"""Gaussian-policy variant on a one-dimensional regulator.

The policy is ``N(W phi(s), sigma^2 I)`` with fixed ``sigma``. For two such
policies the squared-Euclidean OT discrepancy is ``|m1(s) - m2(s)|^2``, so
the trust region is a bound on the mean displacement. Advantages come from
GAE at the executed actions; the candidate set at each state is
``{a_s, m(s)}`` with the advantage at the mean taken as 0, which makes the
sampled dual

    G(lam) = lam * eps + mean_s max{A_s - lam |m(s) - a_s|^2, 0}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .advantage import GaeConfig, fit_linear_value, gae_advantages
from .scalar import golden_section

DUAL_TOL = 1e-10


def polynomial_features(degree):
    """``x -> [1, x, ..., x**degree]`` on scalar states (vectorised)."""
    if degree < 0:
        raise ValueError("degree must be non-negative")

    def phi(states):
        x = np.asarray(states, float).reshape(-1)
        return np.vander(x, degree + 1, increasing=True)

    phi.degree = degree
    return phi


@dataclass(frozen=True)
class ContToyEnv:
    """``x' = clip(x + 0.1 a)``, reward ``-(x^2 + 0.01 a^2)``, 50 steps from ``x0 ~ U[-1, 1]``."""

    horizon: int = 50
    step_size: float = 0.1
    action_penalty: float = 0.01
    bound: float = 1.0

    def reset(self, n, rng):
        return rng.uniform(-self.bound, self.bound, size=n)

    def step(self, x, a):
        a = np.clip(a, -self.bound, self.bound)
        reward = -(x ** 2 + self.action_penalty * a ** 2)
        return np.clip(x + self.step_size * a, -self.bound, self.bound), reward


@dataclass
class GaussianLinearPolicy:
    """Mean ``W @ phi(s)``, fixed log standard deviation, one action dimension."""

    weights: np.ndarray
    log_std: float = 0.0
    features: object = field(default_factory=lambda: polynomial_features(1))

    def __post_init__(self):
        self.weights = np.array(self.weights, float).reshape(-1)

    @classmethod
    def zeros(cls, degree=1, log_std=0.0):
        return cls(np.zeros(degree + 1), log_std, polynomial_features(degree))

    @property
    def std(self) -> float:
        return float(np.exp(self.log_std))

    def mean(self, states):
        return self.features(states) @ self.weights

    def sample(self, states, rng):
        m = self.mean(states)
        return m + self.std * rng.standard_normal(m.shape)

    def copy(self, weights=None):
        return GaussianLinearPolicy(self.weights.copy() if weights is None else weights, self.log_std, self.features)


@dataclass(frozen=True, eq=False)
class ContTrajectory:
    states: np.ndarray
    actions: np.ndarray  # as sampled, before the environment clips them
    rewards: np.ndarray

    def __len__(self):
        return len(self.rewards)

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())


def collect(env: ContToyEnv, policy, n_episodes, rng, deterministic=False):
    """Roll out ``n_episodes`` full episodes side by side."""
    x = env.reset(n_episodes, rng)
    S = np.empty((env.horizon, n_episodes))
    A = np.empty_like(S)
    R = np.empty_like(S)
    for t in range(env.horizon):
        a = policy.mean(x) if deterministic else policy.sample(x, rng)
        S[t], A[t] = x, a
        x, R[t] = env.step(x, a)
    return [ContTrajectory(S[:, i].copy(), A[:, i].copy(), R[:, i].copy()) for i in range(n_episodes)]


def evaluate_continuous(env, policy, n_episodes, rng) -> float:
    return float(np.mean([t.episode_return for t in collect(env, policy, n_episodes, rng)]))


@dataclass(frozen=True, eq=False)
class GaussianBatch:
    """Visited states, executed actions and advantage estimates, weighted equally."""

    states: np.ndarray
    actions: np.ndarray
    advantages: np.ndarray

    def __post_init__(self):
        s, a, adv = (np.asarray(v, float).reshape(-1) for v in (self.states, self.actions, self.advantages))
        if s.size == 0:
            raise ValueError("batch is empty")
        if not (s.size == a.size == adv.size):
            raise ValueError("states, actions and advantages must have equal length")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)
        object.__setattr__(self, "advantages", adv)

    def __len__(self):
        return self.states.size

    def subset(self, idx):
        return GaussianBatch(self.states[idx], self.actions[idx], self.advantages[idx])


def _displacement(batch, mean_fn):
    return (np.asarray(mean_fn(batch.states), float).reshape(-1) - batch.actions) ** 2


def eval_G_gaussian(lam, batch: GaussianBatch, mean_fn, epsilon) -> float:
    d = _displacement(batch, mean_fn)
    return float(lam * epsilon + np.maximum(batch.advantages - lam * d, 0.0).mean())


def solve_dual_gaussian(batch: GaussianBatch, mean_fn, epsilon, tol=DUAL_TOL) -> float:
    """Minimise the sampled ``G`` over ``lam >= 0`` by golden section."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    adv = batch.advantages
    d = _displacement(batch, mean_fn)
    pos = adv > 0
    if not pos.any():
        return 0.0
    # Right slope at 0 is eps - mean(d) over samples with A > 0.
    if epsilon >= np.where(pos, d, 0.0).mean():
        return 0.0
    positive_d = d[pos & (d > 0)]
    hi = adv.max() / positive_d.min()
    f = lambda lam: eval_G_gaussian(lam, batch, mean_fn, epsilon)
    # The right slope at lam_max is eps > 0; double if rounding leaves it negative.
    while f(hi * (1 + 1e-6)) < f(hi):
        hi *= 2.0
    lam, _ = golden_section(f, 0.0, hi, tol=tol)
    return float(lam)


def regularized_objective(weights, policy: GaussianLinearPolicy, batch: GaussianBatch, lam) -> float:
    """``mean_s max{A_s - lam |m_w(s) - a_s|^2, 0}`` for mean weights ``weights``."""
    m = policy.features(batch.states) @ np.asarray(weights, float)
    return float(np.maximum(batch.advantages - lam * (m - batch.actions) ** 2, 0.0).mean())


def regularized_gradient(weights, policy: GaussianLinearPolicy, batch: GaussianBatch, lam) -> np.ndarray:
    """Gradient of :func:`regularized_objective`; zero on saturated samples."""
    X = policy.features(batch.states)
    resid = X @ np.asarray(weights, float) - batch.actions
    active = batch.advantages - lam * resid ** 2 > 0
    return -2.0 * lam * (X[active].T @ resid[active]) / len(batch)


def gaussian_trust_proxy(old_policy, new_policy, states) -> float:
    """Mean ``|m_new(s) - m_old(s)|^2``: the exact OT discrepancy for equal fixed covariances."""
    return float(np.mean((new_policy.mean(states) - old_policy.mean(states)) ** 2))


@dataclass(frozen=True)
class GradientConfig:
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 64
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1 or self.max_grad_norm <= 0:
            raise ValueError("invalid gradient configuration")


@dataclass
class GradientReport:
    policy: GaussianLinearPolicy
    lambda_star: float
    trust_proxy: float
    steps: int
    stopped_early: bool


def policy_gradient_update(policy, batch, lam, epsilon, config=GradientConfig(), rng=None) -> GradientReport:
    """Mini-batch ascent on the regularized advantage.

    Stops as soon as the trust proxy exceeds ``epsilon``; a step that lands
    beyond ``2 * epsilon`` is undone.
    """
    rng = np.random.default_rng(rng)
    w = policy.weights.copy()
    states = batch.states
    steps = 0
    stopped = False
    if lam > 0:
        for _ in range(config.epochs):
            order = rng.permutation(len(batch))
            for lo in range(0, len(batch), config.batch_size):
                g = regularized_gradient(w, policy, batch.subset(order[lo:lo + config.batch_size]), lam)
                norm = np.linalg.norm(g)
                if norm > config.max_grad_norm:
                    g *= config.max_grad_norm / norm
                w_next = w + config.learning_rate * g
                steps += 1
                proxy = gaussian_trust_proxy(policy, policy.copy(w_next), states)
                if proxy > 2 * epsilon:
                    stopped = True
                    break
                w = w_next
                if proxy > epsilon:
                    stopped = True
                    break
            if stopped:
                break
    new = policy.copy(w)
    return GradientReport(new, float(lam), gaussian_trust_proxy(policy, new, states), steps, stopped)


@dataclass(frozen=True)
class ContinuousConfig:
    epsilon: float = 0.05
    cycles: int = 20
    steps_per_cycle: int = 512
    eval_episodes: int = 10
    policy_degree: int = 1
    value_degree: int = 2
    log_std: float = 0.0
    gae: GaeConfig = GaeConfig()
    gradient: GradientConfig = GradientConfig()


@dataclass
class ContinuousResult:
    returns: list  # evaluation return before the first and after every cycle
    lambdas: list
    proxies: list
    policy: GaussianLinearPolicy

    @property
    def improved(self) -> bool:
        return self.returns[-1] > self.returns[0]


def build_batch(trajs, value_fn, gae: GaeConfig) -> GaussianBatch:
    """GAE at every executed action; the horizon end is treated as terminal."""
    adv = [gae_advantages(t.rewards, value_fn(t.states), gae) for t in trajs]
    return GaussianBatch(
        np.concatenate([t.states for t in trajs]),
        np.concatenate([t.actions for t in trajs]),
        np.concatenate(adv),
    )


def train_continuous(config=ContinuousConfig(), seed=0, env=ContToyEnv()) -> ContinuousResult:
    """Collect, fit a linear value, estimate GAE, solve the dual, take gradient steps.

    Evaluations reuse one fixed evaluation seed so first and last scores see
    the same start states and action noise.
    """
    roll_rng, update_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    eval_seed = np.random.SeedSequence(seed).spawn(3)[2]
    policy = GaussianLinearPolicy.zeros(config.policy_degree, config.log_std)
    value_features = polynomial_features(config.value_degree)
    n_episodes = -(-config.steps_per_cycle // env.horizon)

    def evaluate(p):
        return evaluate_continuous(env, p, config.eval_episodes, np.random.default_rng(eval_seed))

    returns, lambdas, proxies = [evaluate(policy)], [], []
    for _ in range(config.cycles):
        trajs = collect(env, policy, n_episodes, roll_rng)
        value_fn = fit_linear_value(trajs, value_features, config.gae.discount)
        batch = build_batch(trajs, value_fn, config.gae)
        lam = solve_dual_gaussian(batch, policy.mean, config.epsilon)
        report = policy_gradient_update(policy, batch, lam, config.epsilon, config.gradient, update_rng)
        policy = report.policy
        lambdas.append(lam)
        proxies.append(report.trust_proxy)
        returns.append(evaluate(policy))
    return ContinuousResult(returns, lambdas, proxies, policy)
