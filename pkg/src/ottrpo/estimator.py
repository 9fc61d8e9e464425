"""scikit-learn style wrappers around the training loops."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .continuous import ContinuousConfig, ContToyEnv, GradientConfig, evaluate_continuous, train_continuous
from .envs import make_env
from .mdp import TabularMdp
from .training import TrainConfig, evaluate_policy, train_tabular


class OTTRPO(BaseEstimator):
    """Tabular trust-region policy optimisation with an optimal-transport trust region.

    ``fit`` takes a :class:`TabularMdp` or a registered environment name. The
    fitted policy is exposed as ``policy_`` and the learning curve as
    ``curve_`` (pairs of environment steps and mean evaluation return).
    """

    def __init__(
        self,
        epsilon=0.01,
        cost="binary",
        advantage="td",
        occupancy="empirical",
        alpha=0.9,
        td_gamma=0.5,
        occupancy_discount=None,
        episodes_per_update=1,
        total_steps=100_000,
        eval_every=5_000,
        eval_episodes=10,
        max_updates=None,
        init="uniform",
        warm_start=False,
        audit=True,
        mass_splitting=True,
        random_state=0,
    ):
        self.epsilon = epsilon
        self.cost = cost
        self.advantage = advantage
        self.occupancy = occupancy
        self.alpha = alpha
        self.td_gamma = td_gamma
        self.occupancy_discount = occupancy_discount
        self.episodes_per_update = episodes_per_update
        self.total_steps = total_steps
        self.eval_every = eval_every
        self.eval_episodes = eval_episodes
        self.max_updates = max_updates
        self.init = init
        self.warm_start = warm_start
        self.audit = audit
        self.mass_splitting = mass_splitting
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        params = self.get_params()
        params.pop("random_state")
        return TrainConfig(**params)

    def fit(self, X, y=None):
        mdp = make_env(X) if isinstance(X, str) else X
        if not isinstance(mdp, TabularMdp):
            raise TypeError("fit expects a TabularMdp or an environment name")
        result = train_tabular(mdp, self._config(), seed=self.random_state)
        self.mdp_ = mdp
        self.policy_ = result.policy
        self.result_ = result
        self.curve_ = np.column_stack([result.steps, result.returns])
        self.n_updates_ = result.n_updates
        return self

    def _states(self, X):
        check_is_fitted(self, "policy_")
        states = np.asarray(X, dtype=int).reshape(-1)
        n = self.policy_.n_states
        if states.size and (states.min() < 0 or states.max() >= n):
            raise ValueError(f"state indices must lie in [0, {n})")
        return states

    def predict_proba(self, X):
        states = self._states(X)
        return self.policy_.probs[states]

    def predict(self, X):
        """Most probable action per state (ties go to the lowest index)."""
        return self.predict_proba(X).argmax(axis=1)

    def score(self, X=None, y=None, n_episodes=10, seed=0):
        """Mean undiscounted return of the fitted policy over sampled episodes."""
        check_is_fitted(self, "policy_")
        mdp = self.mdp_ if X is None else (make_env(X) if isinstance(X, str) else X)
        return evaluate_policy(mdp, self.policy_, n_episodes, np.random.default_rng(seed))


class GaussianOTTRPO(BaseEstimator):
    """Gaussian-policy variant on :class:`ContToyEnv`; ``predict`` returns the policy mean."""

    def __init__(
        self,
        epsilon=0.05,
        cycles=20,
        steps_per_cycle=512,
        eval_episodes=10,
        policy_degree=1,
        value_degree=2,
        log_std=0.0,
        learning_rate=0.05,
        epochs=10,
        batch_size=64,
        max_grad_norm=0.5,
        random_state=0,
    ):
        self.epsilon = epsilon
        self.cycles = cycles
        self.steps_per_cycle = steps_per_cycle
        self.eval_episodes = eval_episodes
        self.policy_degree = policy_degree
        self.value_degree = value_degree
        self.log_std = log_std
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.max_grad_norm = max_grad_norm
        self.random_state = random_state

    def fit(self, X=None, y=None):
        env = ContToyEnv() if X is None or X == "cont-toy" else X
        if not isinstance(env, ContToyEnv):
            raise TypeError("fit expects a ContToyEnv, 'cont-toy' or None")
        config = ContinuousConfig(
            epsilon=self.epsilon,
            cycles=self.cycles,
            steps_per_cycle=self.steps_per_cycle,
            eval_episodes=self.eval_episodes,
            policy_degree=self.policy_degree,
            value_degree=self.value_degree,
            log_std=self.log_std,
            gradient=GradientConfig(self.learning_rate, self.epochs, self.batch_size, self.max_grad_norm),
        )
        result = train_continuous(config, seed=self.random_state, env=env)
        self.env_ = env
        self.policy_ = result.policy
        self.result_ = result
        self.coef_ = result.policy.weights.copy()
        return self

    def predict(self, X):
        check_is_fitted(self, "policy_")
        return self.policy_.mean(np.asarray(X, float).reshape(-1))

    def score(self, X=None, y=None, n_episodes=10, seed=0):
        check_is_fitted(self, "policy_")
        return evaluate_continuous(self.env_, self.policy_, n_episodes, np.random.default_rng(seed))
