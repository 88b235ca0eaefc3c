"""Tabular VRPO: Q-boosting advantages, exact game oracles, and a self-play trainer."""

from .estimators import (CentralizedQCritic, CentralizedVCritic, gae_advantages, qboost_advantages,
                         qboost_targets, recompute_with_policy)
from .games import (GameStateTable, Trajectory, build_kuhn_poker, build_leduc_holdem,
                    build_liars_dice, build_matching_pennies, enumerate_game, load_game, rollout)
from .learner import TrainerConfig, evaluate, init_state, train_iteration
from .oracle import best_response, estimator_mse, exact_policy_gradient, exact_values, exploitability

__all__ = [
    "CentralizedQCritic", "CentralizedVCritic", "GameStateTable", "TrainerConfig", "Trajectory",
    "best_response", "build_kuhn_poker", "build_leduc_holdem", "build_liars_dice",
    "build_matching_pennies", "enumerate_game", "estimator_mse", "evaluate", "exact_policy_gradient",
    "exact_values", "exploitability", "gae_advantages", "init_state", "load_game",
    "qboost_advantages", "qboost_targets", "recompute_with_policy", "rollout", "train_iteration",
]
