"""Tabular benchmark environments built as explicit ``TabularMdp`` tensors.

The grid worlds follow the usual published dynamics of CliffWalking and Taxi;
the two-action chain is the one-step example used throughout the tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp

EPISODE_CAP = 200

# CliffWalking
CLIFF_ROWS, CLIFF_COLS = 4, 12
UP, RIGHT, DOWN, LEFT = range(4)
CLIFF_ACTIONS = ("Up", "Right", "Down", "Left")
_MOVES = {UP: (-1, 0), RIGHT: (0, 1), DOWN: (1, 0), LEFT: (0, -1)}


def cliff_state(row, col):
    return row * CLIFF_COLS + col


CLIFF_START = cliff_state(3, 0)
CLIFF_GOAL = cliff_state(3, 11)
CLIFF_CELLS = tuple(cliff_state(3, c) for c in range(1, 11))


def build_cliffwalking(discount=0.99, max_episode_steps=EPISODE_CAP) -> TabularMdp:
    """4x12 grid: -1 per move, -100 and back to start on the cliff, goal terminates."""
    n = CLIFF_ROWS * CLIFF_COLS
    P = np.zeros((n, 4, n))
    R = np.full((n, 4), -1.0)
    terminal = np.zeros(n, bool)
    terminal[CLIFF_GOAL] = True
    for row in range(CLIFF_ROWS):
        for col in range(CLIFF_COLS):
            s = cliff_state(row, col)
            for a, (dr, dc) in _MOVES.items():
                if terminal[s]:
                    P[s, a, s] = 1.0
                    R[s, a] = 0.0
                    continue
                r2 = min(max(row + dr, 0), CLIFF_ROWS - 1)
                c2 = min(max(col + dc, 0), CLIFF_COLS - 1)
                s2 = cliff_state(r2, c2)
                if s2 in CLIFF_CELLS:
                    R[s, a] = -100.0
                    s2 = CLIFF_START
                P[s, a, s2] = 1.0
    rho = np.zeros(n)
    rho[CLIFF_START] = 1.0
    return TabularMdp(P, R, rho, discount, terminal, max_episode_steps, name="cliffwalking")


def cliff_optimal_policy_actions():
    """A shortest-path policy: Right along rows 0-2, Down in the last column, Up at start."""
    acts = np.full(CLIFF_ROWS * CLIFF_COLS, RIGHT)
    for row in range(3):
        acts[cliff_state(row, CLIFF_COLS - 1)] = DOWN
    acts[CLIFF_START] = UP
    for s in CLIFF_CELLS:
        acts[s] = UP
    acts[CLIFF_GOAL] = UP
    return acts


CLIFF_DETOUR_STATE = cliff_state(2, 0)


def cliff_candidate_policy_actions():
    """The optimal policy except Up (instead of Right) at (2, 0).

    It walks one row higher, returns -15 and differs from
    ``cliff_optimal_policy_actions`` at that single state.
    """
    acts = cliff_optimal_policy_actions()
    acts[CLIFF_DETOUR_STATE] = UP
    return acts


# Taxi
TAXI_MAP = (
    "+---------+",
    "|R: | : :G|",
    "| : | : : |",
    "| : : : : |",
    "| | : | : |",
    "|Y| : |B: |",
    "+---------+",
)
TAXI_LOCS = ((0, 0), (0, 4), (4, 0), (4, 3))
SOUTH, NORTH, EAST, WEST, PICKUP, DROPOFF = range(6)
TAXI_ACTIONS = ("South", "North", "East", "West", "PickUp", "DropOff")
IN_TAXI = 4


def taxi_encode(row, col, passenger, destination):
    return ((row * 5 + col) * 5 + passenger) * 4 + destination


def taxi_decode(state):
    destination = state % 4
    state //= 4
    passenger = state % 5
    state //= 5
    return state // 5, state % 5, passenger, destination


def _taxi_step(row, col, passenger, destination, action):
    """Returns (row, col, passenger, reward, terminated)."""
    reward, done = -1.0, False
    taxi = (row, col)
    if action == SOUTH:
        row = min(row + 1, 4)
    elif action == NORTH:
        row = max(row - 1, 0)
    elif action == EAST:
        if TAXI_MAP[1 + row][2 * col + 2] == ":":
            col += 1
    elif action == WEST:
        if TAXI_MAP[1 + row][2 * col] == ":":
            col -= 1
    elif action == PICKUP:
        if passenger < IN_TAXI and taxi == TAXI_LOCS[passenger]:
            passenger = IN_TAXI
        else:
            reward = -10.0
    elif action == DROPOFF:
        if passenger == IN_TAXI and taxi == TAXI_LOCS[destination]:
            passenger, reward, done = destination, 20.0, True
        elif passenger == IN_TAXI and taxi in TAXI_LOCS:
            passenger = TAXI_LOCS.index(taxi)
        else:
            reward = -10.0
    return row, col, passenger, reward, done


def build_taxi(discount=0.99, max_episode_steps=EPISODE_CAP) -> TabularMdp:
    """5x5 Taxi: 500 states, 6 actions, +20 on delivery, -10 on illegal pick-up/drop-off."""
    n = 500
    P = np.zeros((n, 6, n))
    R = np.zeros((n, 6))
    terminal = np.zeros(n, bool)
    rho = np.zeros(n)
    for s in range(n):
        row, col, passenger, dest = taxi_decode(s)
        if passenger == dest:
            # Only reachable through a successful drop-off.
            terminal[s] = True
            P[s, :, s] = 1.0
            continue
        if passenger < IN_TAXI:
            rho[s] = 1.0
        for a in range(6):
            r2, c2, p2, rew, _ = _taxi_step(row, col, passenger, dest, a)
            P[s, a, taxi_encode(r2, c2, p2, dest)] = 1.0
            R[s, a] = rew
    rho /= rho.sum()
    return TabularMdp(P, R, rho, discount, terminal, max_episode_steps, name="taxi")


def build_two_action_chain(discount=0.9) -> TabularMdp:
    """``s0`` with Left (-1, to ``s2``) and Right (+1, to ``s1``); both successors terminal."""
    P = np.zeros((3, 2, 3))
    P[0, 0, 2] = 1.0
    P[0, 1, 1] = 1.0
    P[1, :, 1] = 1.0
    P[2, :, 2] = 1.0
    R = np.zeros((3, 2))
    R[0] = (-1.0, 1.0)
    return TabularMdp(
        P, R, np.array([1.0, 0.0, 0.0]), discount, np.array([False, True, True]), name="chain"
    )


CHAIN_LEFT, CHAIN_RIGHT = 0, 1


def chain_policy(theta):
    """Policy with ``pi(L|s0) = theta``; terminal rows are uniform."""
    probs = np.full((3, 2), 0.5)
    probs[0] = (theta, 1.0 - theta)
    return probs


@dataclass(frozen=True)
class EnvSpec:
    name: str
    params: dict = field(default_factory=dict)

    def build(self) -> TabularMdp:
        return make_env(self.name, **self.params)


_BUILDERS = {
    "cliffwalking": build_cliffwalking,
    "taxi": build_taxi,
    "chain": build_two_action_chain,
}

TABULAR_ENVS = tuple(_BUILDERS)


def make_env(name, **params) -> TabularMdp:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown tabular environment {name!r}; choose from {TABULAR_ENVS}") from None
    return builder(**params)
