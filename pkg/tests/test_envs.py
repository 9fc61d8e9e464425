import numpy as np
import pytest

from ottrpo.envs import (
    CLIFF_DETOUR_STATE,
    CLIFF_GOAL,
    CLIFF_START,
    DROPOFF,
    EAST,
    LEFT,
    NORTH,
    PICKUP,
    SOUTH,
    WEST,
    EnvSpec,
    build_cliffwalking,
    build_taxi,
    build_two_action_chain,
    cliff_candidate_policy_actions,
    cliff_optimal_policy_actions,
    make_env,
    taxi_decode,
    taxi_encode,
)
from ottrpo.mdp import TabularPolicy, rollout


def walk(mdp, state, actions):
    """Follow deterministic transitions; returns (total reward, final state, done flag)."""
    total = 0.0
    for a in actions:
        total += mdp.reward[state, a]
        state = int(np.argmax(mdp.transition[state, a]))
        if mdp.terminal[state]:
            return total, state, True
    return total, state, False


def test_cliffwalking_shape_and_determinism():
    mdp = build_cliffwalking()
    assert (mdp.n_states, mdp.n_actions) == (48, 4)
    assert mdp.is_deterministic
    assert mdp.terminal.sum() == 1 and mdp.terminal[CLIFF_GOAL]
    assert mdp.max_episode_steps == 200


def test_cliffwalking_optimal_path_returns_minus_13():
    mdp = build_cliffwalking()
    traj = rollout(mdp, TabularPolicy.deterministic(cliff_optimal_policy_actions(), 4), 1, 0)[0]
    assert traj.episode_return == -13 and len(traj) == 13 and traj.dones[-1]


def test_cliffwalking_left_at_start_stays():
    mdp = build_cliffwalking()
    assert mdp.reward[CLIFF_START, LEFT] == -1
    assert mdp.transition[CLIFF_START, LEFT, CLIFF_START] == 1.0


def test_cliff_teleports_without_terminating():
    mdp = build_cliffwalking()
    right = 1
    assert mdp.reward[CLIFF_START, right] == -100
    assert mdp.transition[CLIFF_START, right, CLIFF_START] == 1.0


def test_candidate_policy_differs_at_one_state_and_returns_minus_15():
    mdp = build_cliffwalking()
    opt, cand = cliff_optimal_policy_actions(), cliff_candidate_policy_actions()
    assert np.flatnonzero(opt != cand).tolist() == [CLIFF_DETOUR_STATE]
    traj = rollout(mdp, TabularPolicy.deterministic(cand, 4), 1, 0)[0]
    assert traj.episode_return == -15


def test_taxi_encoding_round_trips():
    seen = set()
    for row in range(5):
        for col in range(5):
            for p in range(5):
                for d in range(4):
                    s = taxi_encode(row, col, p, d)
                    assert taxi_decode(s) == (row, col, p, d)
                    seen.add(s)
    assert seen == set(range(500))


def test_taxi_illegal_dropoff_and_pickup():
    mdp = build_taxi()
    s = taxi_encode(2, 2, 0, 1)
    for a in (DROPOFF, PICKUP):
        assert mdp.reward[s, a] == -10
        assert mdp.transition[s, a, s] == 1.0


def test_taxi_scripted_route():
    # Taxi at (2, 2), passenger at R (0, 0), destination G (0, 4).
    mdp = build_taxi()
    start = taxi_encode(2, 2, 0, 1)
    route = [WEST, WEST, NORTH, NORTH, PICKUP, SOUTH, SOUTH, EAST, EAST, EAST, EAST, NORTH, NORTH, DROPOFF]
    total, _, done = walk(mdp, start, route)
    assert done
    assert total == 20 - (len(route) - 1)


def test_taxi_walls_block_moves():
    mdp = build_taxi()
    s = taxi_encode(0, 1, 4, 0)  # wall east of (0, 1)
    assert mdp.transition[s, EAST, s] == 1.0 and mdp.reward[s, EAST] == -1


def test_taxi_structure():
    mdp = build_taxi()
    assert (mdp.n_states, mdp.n_actions) == (500, 6)
    assert mdp.is_deterministic
    starts = np.flatnonzero(mdp.start_dist)
    assert len(starts) == 25 * 4 * 3
    for s in starts:
        _, _, p, d = taxi_decode(s)
        assert p < 4 and p != d


def test_chain_is_one_step():
    mdp = build_two_action_chain()
    assert mdp.reward[0].tolist() == [-1.0, 1.0]
    assert mdp.terminal.tolist() == [False, True, True]


@pytest.mark.parametrize("name", ["cliffwalking", "taxi", "chain"])
def test_building_twice_gives_identical_tensors(name):
    a, b = EnvSpec(name).build(), make_env(name)
    np.testing.assert_array_equal(a.transition, b.transition)
    np.testing.assert_array_equal(a.reward, b.reward)
    np.testing.assert_array_equal(a.start_dist, b.start_dist)


def test_unknown_env():
    with pytest.raises(ValueError):
        make_env("mountaincar")
