"""Trust-region policy optimisation with optimal-transport trust regions."""
from .continuous import ContToyEnv, GaussianLinearPolicy, train_continuous
from .envs import build_cliffwalking, build_taxi, build_two_action_chain, make_env
from .estimator import OTTRPO, GaussianOTTRPO
from .mdp import OccupancyMeasure, TabularMdp, TabularPolicy, evaluate_exact, occupancy_empirical, occupancy_exact
from .oracle import certify, solve_primal_lp
from .training import TrainConfig, train_tabular
from .transport import CostMatrix, binary_cost, make_cost, ot_discrepancy
from .trust_region import DualSolution, UpdateReport, solve_dual, update_policy_discrete

__all__ = [
    "ContToyEnv",
    "CostMatrix",
    "DualSolution",
    "GaussianLinearPolicy",
    "GaussianOTTRPO",
    "OTTRPO",
    "OccupancyMeasure",
    "TabularMdp",
    "TabularPolicy",
    "TrainConfig",
    "UpdateReport",
    "binary_cost",
    "build_cliffwalking",
    "build_taxi",
    "build_two_action_chain",
    "certify",
    "evaluate_exact",
    "make_cost",
    "make_env",
    "occupancy_empirical",
    "occupancy_exact",
    "ot_discrepancy",
    "solve_dual",
    "solve_primal_lp",
    "train_continuous",
    "train_tabular",
    "update_policy_discrete",
]
