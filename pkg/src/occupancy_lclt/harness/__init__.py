"""Experiment plumbing: configuration, rate sweeps and the command line."""

from ..rng import derive_stream
from .config import ExperimentConfig, load_config, parse_config
from .rates import LogLogFit, RateSeries, fit_loglog, run_rate_experiment

__all__ = ["ExperimentConfig", "LogLogFit", "RateSeries", "derive_stream", "fit_loglog",
           "load_config", "parse_config", "run_rate_experiment"]
