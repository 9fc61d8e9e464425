import numpy as np
import pytest

from ottrpo.transport import CostMatrix
from ottrpo.validation import (
    as_probs,
    check_advantage,
    check_cost_matrix,
    check_distribution,
    check_epsilon,
    check_stochastic_matrix,
)


def test_distribution_accepts_probability_vector():
    out = check_distribution([0.25, 0.75], "p")
    assert out.dtype == float and out.sum() == 1.0


@pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0], [[0.5, 0.5]]])
def test_distribution_rejects(bad):
    with pytest.raises(ValueError):
        check_distribution(bad, "p")


def test_stochastic_matrix_rows():
    check_stochastic_matrix(np.full((3, 2), 0.5), "pi")
    with pytest.raises(ValueError):
        check_stochastic_matrix(np.array([[0.5, 0.4]]), "pi")


def test_cost_matrix_rules():
    c = check_cost_matrix(CostMatrix(1 - np.eye(3)))
    assert c.shape == (3, 3)
    with pytest.raises(ValueError):
        check_cost_matrix(np.ones((2, 2)))  # non-zero diagonal
    with pytest.raises(ValueError):
        check_cost_matrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        check_cost_matrix(1 - np.eye(3), n_actions=2)


def test_epsilon_and_advantage():
    assert check_epsilon(0.1) == 0.1
    assert check_epsilon(0.0, allow_zero=True) == 0.0
    for bad in (0.0, -1.0, float("inf")):
        with pytest.raises(ValueError):
            check_epsilon(bad)
    with pytest.raises(ValueError):
        check_advantage(np.zeros((2, 3)), 2, 2)


def test_as_probs_reads_policy_objects():
    class P:
        probs = np.array([[1.0, 0.0]])

    assert as_probs(P()).shape == (1, 2)
