"""Advantage estimators: tabular TD(0) on Q, GAE, and a linear value baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_probs

RIDGE = 1e-8


@dataclass(frozen=True)
class TdConfig:
    learning_rate: float = 0.9
    discount: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")


@dataclass(frozen=True)
class GaeConfig:
    discount: float = 0.99
    trace: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if not 0.0 <= self.trace <= 1.0:
            raise ValueError(f"trace must lie in [0, 1], got {self.trace}")


def td_q_values(trajectories, n_states, n_actions, config: TdConfig, q_init=None):
    """One SARSA-style pass over all transitions in collection order.

    ``Q(s, a) <- (1 - alpha) Q(s, a) + alpha (r + gamma Q(s', a'))``, with no
    bootstrap after a terminal transition or at a step-cap cut.
    """
    trajectories = list(trajectories)
    if not trajectories or all(len(t) == 0 for t in trajectories):
        raise ValueError("td_q_values needs at least one transition")
    Q = (np.zeros((n_states, n_actions)) if q_init is None else np.array(q_init, float)).tolist()
    alpha, gamma = config.learning_rate, config.discount
    keep = 1.0 - alpha
    for traj in trajectories:
        for s, a, r, s2, a2, done in zip(
            traj.states.tolist(),
            traj.actions.tolist(),
            traj.rewards.tolist(),
            traj.next_states.tolist(),
            traj.next_actions.tolist(),
            traj.dones.tolist(),
        ):
            target = r if done or a2 < 0 else r + gamma * Q[s2][a2]
            Q[s][a] = keep * Q[s][a] + alpha * target
    return np.asarray(Q)


def advantage_from_q(q, policy):
    """``A(s, a) = Q(s, a) - sum_a' pi(a'|s) Q(s, a')``."""
    q = np.asarray(q, float)
    return q - np.sum(as_probs(policy) * q, axis=1, keepdims=True)


def td_advantage(trajectories, policy, config: TdConfig, q_init=None, return_q=False):
    """TD estimate of the advantage of ``policy`` from its own trajectories."""
    probs = as_probs(policy)
    q = td_q_values(trajectories, probs.shape[0], probs.shape[1], config, q_init=q_init)
    adv = advantage_from_q(q, probs)
    return (adv, q) if return_q else adv


def gae_advantages(rewards, values, config: GaeConfig, bootstrap=0.0):
    """``A_t = delta_t + gamma * lam * A_{t+1}``, ``delta_t = r_t + gamma V(s_{t+1}) - V(s_t)``.

    ``values[t]`` is ``V(s_t)``; ``bootstrap`` is ``V`` after the last step
    (0 for a terminal end).
    """
    rewards = np.asarray(rewards, float)
    values = np.asarray(values, float)
    if rewards.shape != values.shape or rewards.ndim != 1:
        raise ValueError("rewards and values must be 1-D arrays of equal length")
    gamma, lam = config.discount, config.trace
    next_values = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * next_values - values
    adv = np.empty_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * lam * running
        adv[t] = running
    return adv


def discounted_returns(rewards, discount, bootstrap=0.0):
    rewards = np.asarray(rewards, float)
    out = np.empty_like(rewards)
    running = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + discount * running
        out[t] = running
    return out


class LinearValueFunction:
    """Least-squares fit of returns-to-go on a feature map."""

    def __init__(self, features, coef):
        self.features = features
        self.coef_ = np.asarray(coef, float)

    def __call__(self, states):
        return np.asarray(self.features(states), float) @ self.coef_


def fit_linear_value(trajectories, features, discount) -> LinearValueFunction:
    """Regress discounted returns-to-go on ``features(states)``.

    A rank-deficient design falls back to ridge regression with coefficient 1e-8.
    """
    X_parts, y_parts = [], []
    for traj in trajectories:
        if len(traj.rewards) == 0:
            continue
        X_parts.append(np.asarray(features(traj.states), float))
        y_parts.append(discounted_returns(traj.rewards, discount))
    if not X_parts:
        raise ValueError("fit_linear_value needs at least one non-empty trajectory")
    X = np.vstack(X_parts)
    y = np.concatenate(y_parts)
    d = X.shape[1]
    if X.shape[0] >= d and np.linalg.matrix_rank(X) == d:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    else:
        coef = np.linalg.solve(X.T @ X + RIDGE * np.eye(d), X.T @ y)
    return LinearValueFunction(features, coef)
