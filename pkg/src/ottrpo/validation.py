"""Input validation helpers shared by the estimators and the functional API."""
from __future__ import annotations

import numbers

import numpy as np

DIST_ATOL = 1e-8


def check_distribution(p, name="distribution", atol=DIST_ATOL):
    """Return ``p`` as a 1-D float array, raising if it is not a probability vector."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(p < -atol):
        raise ValueError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError(f"{name} must sum to 1, sums to {p.sum()!r}")
    return p


def check_stochastic_matrix(probs, name="policy", atol=1e-10):
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(probs < -atol):
        raise ValueError(f"{name} has negative entries")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > atol):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"{name} row {bad} sums to {sums[bad]!r}, expected 1")
    return probs


def check_cost_matrix(cost, n_actions=None):
    """Validate a transport cost: square, non-negative, zero diagonal."""
    c = np.asarray(getattr(cost, "c", cost), dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost must be a square matrix, got shape {c.shape}")
    if n_actions is not None and c.shape[0] != n_actions:
        raise ValueError(f"cost has {c.shape[0]} actions, expected {n_actions}")
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise ValueError("cost entries must be finite and non-negative")
    if np.any(np.diag(c) != 0):
        raise ValueError("cost must vanish on the diagonal")
    return c


def check_epsilon(epsilon, allow_zero=False):
    if not isinstance(epsilon, numbers.Real) or not np.isfinite(epsilon):
        raise ValueError(f"epsilon must be a finite real, got {epsilon!r}")
    if epsilon < 0 or (epsilon == 0 and not allow_zero):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    return float(epsilon)


def check_advantage(advantage, n_states, n_actions):
    adv = np.asarray(advantage, dtype=float)
    if adv.shape != (n_states, n_actions):
        raise ValueError(
            f"advantage has shape {adv.shape}, expected {(n_states, n_actions)}"
        )
    if not np.all(np.isfinite(adv)):
        raise ValueError("advantage contains non-finite entries")
    return adv


def as_probs(policy):
    """Accept a ``TabularPolicy`` or a raw matrix and return the matrix."""
    return np.asarray(getattr(policy, "probs", policy), dtype=float)


def as_weights(occupancy):
    return np.asarray(getattr(occupancy, "weights", occupancy), dtype=float)
