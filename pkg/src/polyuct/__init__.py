"""Polynomial-bonus UCB for stochastic bandits and closed-loop Monte Carlo tree search."""

from ._seeding import derive_seed, make_rng
from .bandit_core import (
    ArmStats,
    AssumptionParams,
    BoundViolation,
    RewardProcess,
    TransitionTable,
    update_stats,
    validate_transition_table,
)
from .constants import (
    DerivedConstants,
    InfeasibleError,
    LayerConstants,
    LayerPropagationError,
    NpNotFoundError,
    ProblemShape,
    VacuousBoundError,
    A_of_t,
    beta_prime,
    compute_Np,
    leaf_beta,
    lemma_beta_T,
    pick_alpha,
    propagate_layers,
    root_constants,
)
from .env import ChainMDP, FrozenLake, TabularMDP, enumerate_transitions, frozen_lake_4x4, value_iteration
from .mab_sim import (
    MABInstance,
    convergence_curve,
    estimate_tail,
    estimate_tails,
    exact_arm_means,
    hoeffding_tail_check,
    run_ucb,
)
from .mcts import SearchConfig, run_episode, search, simulate_once
from .ucb_policy import APPENDIX_PARAMS, ExplorationParams, InvalidParameters, exploration_bonus, select_arm, validate_params

__version__ = "0.1.0"
