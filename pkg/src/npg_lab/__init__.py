"""Stochastic softmax natural policy gradient with value baselines: bandits, tabular MDPs,
exact-expectation oracles and an experiment harness."""

from npg_lab.bandit import BanditInstance, RewardDistribution, k20_bandit_instance
from npg_lab.errors import (
    DegenerateInstance,
    EmptyWindow,
    NumericalFailure,
    SaturatedTrace,
    SolveFailure,
)
from npg_lab.mdp import TabularMdp, evaluate_policy, optimal_policy, tree_mdp
from npg_lab.policy import PolicyParams, softmax
from npg_lab.updates import AdaptiveStep, ConstantStep, EstimatorKind, UpdateConfig

__all__ = [
    "AdaptiveStep",
    "BanditInstance",
    "ConstantStep",
    "DegenerateInstance",
    "EmptyWindow",
    "EstimatorKind",
    "NumericalFailure",
    "PolicyParams",
    "RewardDistribution",
    "SaturatedTrace",
    "SolveFailure",
    "TabularMdp",
    "UpdateConfig",
    "evaluate_policy",
    "optimal_policy",
    "k20_bandit_instance",
    "softmax",
    "tree_mdp",
]
