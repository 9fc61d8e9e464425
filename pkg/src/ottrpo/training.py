"""Tabular training loop: collect episodes, estimate, solve the dual, update."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .advantage import TdConfig, advantage_from_q, td_q_values
from .envs import make_env
from .mdp import (
    TabularMdp,
    TabularPolicy,
    evaluate_exact,
    iter_episodes,
    occupancy_empirical,
    occupancy_exact,
)
from .transport import make_cost
from .trust_region import solve_dual, update_policy_discrete

ADVANTAGE_MODES = ("td", "exact")
OCCUPANCY_MODES = ("empirical", "exact")
INIT_MODES = ("uniform", "first-action")

# Evaluation points are averaged over this many sampled episodes.
EVAL_EPISODES = 10
# Breakpoint-count threshold above which the dual switches from full evaluation to bisection.
TRAIN_CANDIDATE_BUDGET = 256


@dataclass
class TrainConfig:
    epsilon: float = 0.01
    cost: str = "binary"
    advantage: str = "td"
    occupancy: str = "empirical"
    alpha: float = 0.9
    td_gamma: float = 0.5
    # None: weight visits by the MDP's own discount
    occupancy_discount: Optional[float] = None
    episodes_per_update: int = 1
    total_steps: int = 100_000
    eval_every: int = 5_000
    eval_episodes: int = EVAL_EPISODES
    max_updates: Optional[int] = None
    init: str = "uniform"
    warm_start: bool = False
    audit: bool = True
    mass_splitting: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.advantage not in ADVANTAGE_MODES:
            raise ValueError(f"advantage must be one of {ADVANTAGE_MODES}")
        if self.occupancy not in OCCUPANCY_MODES:
            raise ValueError(f"occupancy must be one of {OCCUPANCY_MODES}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        TdConfig(self.alpha, self.td_gamma)
        if self.occupancy_discount is not None and not 0.0 <= self.occupancy_discount <= 1.0:
            raise ValueError("occupancy_discount must lie in [0, 1]")
        for name in ("episodes_per_update", "total_steps", "eval_every", "eval_episodes"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.total_steps % self.eval_every:
            raise ValueError("eval_every must divide total_steps")
        if self.max_updates is not None and self.max_updates < 0:
            raise ValueError("max_updates must be non-negative")

    @property
    def needs_rollouts(self) -> bool:
        return self.advantage == "td" or self.occupancy == "empirical"

    def replace(self, **changes) -> "TrainConfig":
        data = asdict(self)
        data.update(changes)
        return TrainConfig(**data)

    @classmethod
    def field_names(cls):
        return tuple(f.name for f in fields(cls))


@dataclass
class UpdateRecord:
    step: int
    lambda_star: float
    t_star: float
    achieved_discrepancy: float
    duality_gap: float
    dual_value: float


@dataclass
class TrainResult:
    steps: list
    returns: list
    policy: TabularPolicy
    n_updates: int
    env_steps: int
    updates: list = field(default_factory=list)

    @property
    def max_discrepancy(self) -> float:
        """Largest audited average OT discrepancy over all updates (0 when audits are off)."""
        vals = [u.achieved_discrepancy for u in self.updates if not math.isnan(u.achieved_discrepancy)]
        return max(vals, default=0.0)

    @property
    def max_duality_gap(self) -> float:
        return max((u.duality_gap / (1.0 + abs(u.dual_value)) for u in self.updates), default=0.0)

    def final_score(self, fraction=0.1) -> float:
        """Mean evaluation return over the last ``fraction`` of the training steps."""
        steps = np.asarray(self.steps, float)
        rets = np.asarray(self.returns, float)
        cutoff = steps.max() * (1.0 - fraction)
        return float(rets[steps > cutoff].mean()) if np.any(steps > cutoff) else float(rets[-1])

    def score_at(self, fraction) -> float:
        """Evaluation return at the first cadence point at or after ``fraction`` of training."""
        steps = np.asarray(self.steps, float)
        idx = int(np.searchsorted(steps, fraction * steps.max()))
        return float(self.returns[min(idx, len(self.returns) - 1)])


def initial_policy(mdp: TabularMdp, init="uniform") -> TabularPolicy:
    if init == "uniform":
        return TabularPolicy.uniform(mdp.n_states, mdp.n_actions)
    return TabularPolicy.deterministic(np.zeros(mdp.n_states, int), mdp.n_actions)


def evaluate_policy(mdp: TabularMdp, policy, n_episodes, rng) -> float:
    """Mean undiscounted return over ``n_episodes`` sampled episodes."""
    return float(np.mean([t.episode_return for t in iter_episodes(mdp, policy, n_episodes, rng)]))


def spawn_streams(seed, n=3):
    """Independent generators for (rollouts, evaluation, spare) derived from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def train_tabular(mdp: TabularMdp, config: TrainConfig, seed=0, policy=None, callback=None) -> TrainResult:
    """Run the trust-region loop on ``mdp``.

    The x-axis of the learning curve is environment steps consumed by the
    training rollouts. Without rollouts (exact advantage and occupancy) every
    update counts as one step and ``max_updates`` bounds the run.
    """
    config.validate()
    cost = make_cost(config.cost, mdp.n_actions)
    td = TdConfig(config.alpha, config.td_gamma)
    occ_discount = mdp.discount if config.occupancy_discount is None else config.occupancy_discount
    roll_rng, eval_rng, _ = spawn_streams(seed)
    policy = initial_policy(mdp, config.init) if policy is None else TabularPolicy(getattr(policy, "probs", policy))

    steps_done = 0
    n_updates = 0
    q = None
    curve_steps = [0]
    curve_returns = [evaluate_policy(mdp, policy, config.eval_episodes, eval_rng)]
    next_eval = config.eval_every
    records = []
    limit = config.total_steps if config.needs_rollouts else config.max_updates or config.total_steps

    while steps_done < limit and (config.max_updates is None or n_updates < config.max_updates):
        if config.needs_rollouts:
            trajs = list(iter_episodes(mdp, policy, config.episodes_per_update, roll_rng))
            steps_done += sum(len(t) for t in trajs)
        else:
            trajs = None
            steps_done += 1

        if config.advantage == "td":
            q = td_q_values(trajs, mdp.n_states, mdp.n_actions, td, q_init=q if config.warm_start else None)
            adv = advantage_from_q(q, policy)
        else:
            adv = evaluate_exact(mdp, policy).advantage
        if config.occupancy == "empirical":
            occ = occupancy_empirical(trajs, occ_discount, n_states=mdp.n_states)
        else:
            occ = occupancy_exact(mdp, policy)

        dual = solve_dual(policy, occ, adv, cost, config.epsilon, candidate_budget=TRAIN_CANDIDATE_BUDGET)
        report = update_policy_discrete(policy, dual, mass_splitting=config.mass_splitting, audit=config.audit)
        records.append(
            UpdateRecord(
                step=steps_done,
                lambda_star=report.lambda_star,
                t_star=report.t_star,
                achieved_discrepancy=report.achieved_discrepancy,
                duality_gap=report.duality_gap,
                dual_value=report.dual_value,
            )
        )
        policy = report.new_policy
        n_updates += 1
        if callback is not None:
            callback(n_updates, policy, report)

        while steps_done >= next_eval and next_eval <= limit:
            curve_steps.append(next_eval)
            curve_returns.append(evaluate_policy(mdp, policy, config.eval_episodes, eval_rng))
            next_eval += config.eval_every

    return TrainResult(curve_steps, curve_returns, policy, n_updates, steps_done, records)


# Published hyperparameters for the discrete benchmarks.
ENV_DEFAULTS = {
    "cliffwalking": dict(
        alpha=0.999999, td_gamma=0.2, epsilon=0.01, episodes_per_update=1, cost="binary",
        total_steps=500_000, eval_every=5_000,
    ),
    "taxi": dict(
        alpha=0.9, td_gamma=0.5, epsilon=0.01, episodes_per_update=32, cost="equal",
        total_steps=450_000, eval_every=5_000,
    ),
    "chain": dict(
        advantage="exact", occupancy="exact", epsilon=0.25, cost="binary", init="first-action",
        total_steps=20, eval_every=1,
    ),
}


def default_config(env, **overrides) -> TrainConfig:
    params = dict(ENV_DEFAULTS.get(env, {}))
    params.update(overrides)
    return TrainConfig(**params)


def run_seed(env, config: TrainConfig, seed) -> TrainResult:
    return train_tabular(make_env(env), config, seed=seed)
