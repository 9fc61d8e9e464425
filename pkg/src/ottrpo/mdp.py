"""Finite MDPs, exact policy evaluation, occupancy measures and trajectory sampling.

Everything here is exact linear algebra on dense arrays; it is the ground truth
the estimators and the trust-region update are tested against.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional

import numpy as np

from .validation import as_probs, check_distribution, check_stochastic_matrix

# Rollouts on MDPs without a step cap are cut here so sampling always terminates.
DEFAULT_STEP_GUARD = 10_000


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite MDP with dense transition tensor ``transition[s, a, s']``.

    Terminal states must self-loop with zero reward under every action.
    """

    transition: np.ndarray
    reward: np.ndarray
    start_dist: np.ndarray
    discount: float
    terminal: Optional[np.ndarray] = None
    max_episode_steps: Optional[int] = None
    name: str = "mdp"

    def __post_init__(self):
        P = _frozen(self.transition)
        R = _frozen(self.reward)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        n_states, n_actions = P.shape[:2]
        if R.shape != (n_states, n_actions):
            raise ValueError(f"reward must have shape {(n_states, n_actions)}, got {R.shape}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=2) - 1.0) > 1e-12):
            raise ValueError("transition rows must be probability vectors")
        rho = _frozen(check_distribution(self.start_dist, "start_dist", atol=1e-12))
        if rho.shape != (n_states,):
            raise ValueError("start_dist length must equal the number of states")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        term = np.zeros(n_states, bool) if self.terminal is None else np.asarray(self.terminal, bool)
        if term.shape != (n_states,):
            raise ValueError("terminal flags must have one entry per state")
        for s in np.flatnonzero(term):
            if np.any(P[s, :, s] != 1.0) or np.any(R[s] != 0.0):
                raise ValueError(f"terminal state {s} must self-loop with zero reward")
        if self.max_episode_steps is not None and self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be positive or None")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "start_dist", rho)
        object.__setattr__(self, "terminal", _frozen(term, bool))
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @cached_property
    def is_deterministic(self) -> bool:
        return bool(np.all(self.transition.max(axis=2) == 1.0))

    @cached_property
    def _sampling_tables(self):
        # Plain Python lists: per-step indexing is far cheaper than on ndarrays.
        if self.is_deterministic:
            nxt = self.transition.argmax(axis=2).tolist()
            return nxt, None
        cum = np.cumsum(self.transition, axis=2)
        cum[..., -1] = 1.0
        return None, cum.tolist()


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Row-stochastic ``probs[s, a]``."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(check_stochastic_matrix(self.probs)))

    @classmethod
    def uniform(cls, n_states, n_actions):
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions):
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def greedy_actions(self):
        return self.probs.argmax(axis=1)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """Normalised discounted state-visitation distribution."""

    weights: np.ndarray

    def __post_init__(self):
        w = check_distribution(self.weights, "occupancy weights", atol=1e-10)
        object.__setattr__(self, "weights", _frozen(np.clip(w, 0.0, None)))


@dataclass(frozen=True, eq=False)
class ValueTables:
    v: np.ndarray
    q: np.ndarray
    advantage: np.ndarray
    expected_return: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One episode stored column-wise.

    ``next_actions[t]`` is -1 on the last step; ``dones[t]`` marks arrival in a
    terminal state (a step-cap cut leaves it False).
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    next_actions: np.ndarray
    dones: np.ndarray
    seed: Optional[int] = None

    def __len__(self):
        return len(self.states)

    @property
    def steps(self) -> list:
        nxt = [None if a < 0 else int(a) for a in self.next_actions]
        return list(
            zip(
                self.states.tolist(),
                self.actions.tolist(),
                self.rewards.tolist(),
                self.next_states.tolist(),
                nxt,
                self.dones.tolist(),
            )
        )

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())

    @property
    def truncated(self) -> bool:
        return len(self) > 0 and not bool(self.dones[-1])


def _check_pair(mdp: TabularMdp, policy) -> np.ndarray:
    probs = as_probs(policy)
    if probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"policy shape {probs.shape} does not match MDP {(mdp.n_states, mdp.n_actions)}"
        )
    return probs


def policy_kernel(mdp: TabularMdp, policy):
    """State-to-state kernel ``P_pi`` and expected reward ``r_pi`` under ``policy``."""
    probs = _check_pair(mdp, policy)
    P_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", probs, mdp.reward)
    return P_pi, r_pi


def evaluate_exact(mdp: TabularMdp, policy) -> ValueTables:
    """Solve the Bellman linear system for ``V``, then derive ``Q``, ``A`` and ``J``."""
    P_pi, r_pi = policy_kernel(mdp, policy)
    n = mdp.n_states
    v = np.linalg.solve(np.eye(n) - mdp.discount * P_pi, r_pi)
    q = mdp.reward + mdp.discount * mdp.transition @ v
    adv = q - v[:, None]
    return ValueTables(v=v, q=q, advantage=adv, expected_return=float(mdp.start_dist @ v))


def occupancy_exact(mdp: TabularMdp, policy, include_terminal: bool = False) -> OccupancyMeasure:
    """Normalised discounted occupancy solving ``(I - gamma P_pi^T) x = (1 - gamma) rho``.

    By default terminal states are treated as exits: they carry no mass and the
    remaining weights are renormalised. With ``include_terminal=True`` the plain
    absorbing-chain occupancy is returned, which already sums to one.
    """
    P_pi, _ = policy_kernel(mdp, policy)
    gamma = mdp.discount
    if not include_terminal:
        P_pi = P_pi.copy()
        P_pi[mdp.terminal] = 0.0
    x = np.linalg.solve(np.eye(mdp.n_states) - gamma * P_pi.T, (1.0 - gamma) * mdp.start_dist)
    x = np.clip(x, 0.0, None)
    if not include_terminal:
        x[mdp.terminal] = 0.0
    total = x.sum()
    if total <= 0:
        raise ValueError("policy never visits a non-terminal state")
    return OccupancyMeasure(x / total)


def discounted_visitation(mdp: TabularMdp, policy) -> np.ndarray:
    """Unnormalised ``sum_t gamma^t P(s_t = s)``; sums to ``1 / (1 - gamma)``."""
    return occupancy_exact(mdp, policy, include_terminal=True).weights / (1.0 - mdp.discount)


def _as_generator(rng_seed):
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed, None
    return np.random.default_rng(rng_seed), rng_seed


def _policy_tables(probs):
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    return cum.tolist()


def iter_episodes(mdp: TabularMdp, policy, n_episodes: int, rng) -> Iterator[Trajectory]:
    """Yield ``n_episodes`` sampled episodes using generator ``rng``."""
    probs = _check_pair(mdp, policy)
    cum_pi = _policy_tables(probs)
    nxt_table, cum_p = mdp._sampling_tables
    reward = mdp.reward.tolist()
    terminal = mdp.terminal.tolist()
    cap = mdp.max_episode_steps or DEFAULT_STEP_GUARD
    start_cum = np.cumsum(mdp.start_dist)
    start_cum[-1] = 1.0
    for _ in range(n_episodes):
        s = int(np.searchsorted(start_cum, rng.random(), side="right"))
        u = rng.random(2 * cap + 1).tolist()
        k = 0
        states, actions, rewards, nexts, dones = [], [], [], [], []
        a = bisect_right(cum_pi[s], u[k])
        k += 1
        t = 0
        while t < cap and not terminal[s]:
            if nxt_table is not None:
                s2 = nxt_table[s][a]
            else:
                s2 = bisect_right(cum_p[s][a], u[k])
                k += 1
            states.append(s)
            actions.append(a)
            rewards.append(reward[s][a])
            nexts.append(s2)
            done = terminal[s2]
            dones.append(done)
            t += 1
            s = s2
            if done or t >= cap:
                break
            a = bisect_right(cum_pi[s], u[k])
            k += 1
            if k >= len(u):
                u = rng.random(2 * cap + 1).tolist()
                k = 0
        next_actions = actions[1:] + [-1]
        yield Trajectory(
            states=np.asarray(states, dtype=np.int64),
            actions=np.asarray(actions, dtype=np.int64),
            rewards=np.asarray(rewards, dtype=float),
            next_states=np.asarray(nexts, dtype=np.int64),
            next_actions=np.asarray(next_actions, dtype=np.int64),
            dones=np.asarray(dones, dtype=bool),
        )


def rollout(mdp: TabularMdp, policy, n_episodes: int, rng_seed=None) -> list:
    """Sample ``n_episodes`` episodes; deterministic for a fixed integer seed.

    Episodes start from ``mdp.start_dist`` and stop on reaching a terminal
    state or after ``mdp.max_episode_steps`` steps.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    rng, seed = _as_generator(rng_seed)
    out = []
    for traj in iter_episodes(mdp, policy, n_episodes, rng):
        object.__setattr__(traj, "seed", seed)
        out.append(traj)
    return out


def occupancy_empirical(trajectories, discount: float, n_states: Optional[int] = None) -> OccupancyMeasure:
    """Discount-weighted visit counts (weight ``gamma**t`` at step ``t``), normalised."""
    trajectories = list(trajectories)
    if not trajectories or all(len(t) == 0 for t in trajectories):
        raise ValueError("occupancy_empirical needs at least one non-empty trajectory")
    if n_states is None:
        n_states = 1 + max(int(t.states.max()) for t in trajectories if len(t))
    w = np.zeros(n_states)
    for traj in trajectories:
        if len(traj) == 0:
            continue
        np.add.at(w, traj.states, np.power(float(discount), np.arange(len(traj))))
    return OccupancyMeasure(w / w.sum())


def random_mdp(n_states, n_actions, discount, rng, reward_scale=1.0, max_episode_steps=None):
    """Dense random MDP without terminal states (handy for property tests)."""
    rng = np.random.default_rng(rng)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    rho = rng.dirichlet(np.ones(n_states))
    return TabularMdp(P, R, rho, discount, max_episode_steps=max_episode_steps, name="random")


def random_policy(n_states, n_actions, rng, concentration=1.0):
    rng = np.random.default_rng(rng)
    return TabularPolicy(rng.dirichlet(np.full(n_actions, concentration), size=n_states))
