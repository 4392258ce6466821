"""Contribution valuation for federated learning: coalition games, sampling
estimators, contribution-aware client selection and aggregation, and a small
federated simulator."""

from .aggregation import ModelParams, aggregate, fedavg_uniform, shapfed_wa_weights, softmax_weights
from .budget import BudgetExceeded, BudgetMeter
from .config import ConfigError, ExperimentConfig, parse_config, serialize_config
from .estimators import (
    ESTIMATOR_IDS,
    OwenConfig,
    data_banzhaf,
    estimate,
    gtg_shapley,
    mc_shapley,
    owen_strict,
    owen_walk,
    weighted_shap,
)
from .games import (
    Coalition,
    CoalitionalGame,
    ContributionVector,
    NormalizedGame,
    TableGame,
    exact_banzhaf,
    exact_shapley,
    normalize,
    standard_games,
)
from .selection import BanditState, SelectionConfig, select_clients
from .sim import run_experiment, run_round, setup_run

__all__ = [
    "ESTIMATOR_IDS", "BanditState", "BudgetExceeded", "BudgetMeter", "Coalition", "CoalitionalGame",
    "ConfigError", "ContributionVector", "ExperimentConfig", "ModelParams", "NormalizedGame", "OwenConfig",
    "SelectionConfig", "TableGame", "aggregate", "data_banzhaf", "estimate", "exact_banzhaf", "exact_shapley",
    "fedavg_uniform", "gtg_shapley", "mc_shapley", "normalize", "owen_strict", "owen_walk", "parse_config",
    "run_experiment", "run_round", "select_clients", "serialize_config", "setup_run", "shapfed_wa_weights",
    "softmax_weights", "standard_games", "weighted_shap",
]
