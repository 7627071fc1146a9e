"""Experiment harness: configuration, Monte Carlo runner, catalog and CLI."""

from .config import DEFAULT_SEED, ConfigError, ExperimentConfig, build_config
from .experiments import builtin_experiments, get_experiment
from .runner import AggregateResult, ExperimentOutput, aggregate, monte_carlo, run_experiment

__all__ = [
    "DEFAULT_SEED", "ConfigError", "ExperimentConfig", "build_config",
    "builtin_experiments", "get_experiment", "AggregateResult", "ExperimentOutput",
    "aggregate", "monte_carlo", "run_experiment",
]
