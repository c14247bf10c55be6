"""Declarative experiment configs and the resumable stage pipeline."""
from .config import BASELINES, ConfigError, ExperimentConfig, load_config, parse_config, validate
from .pipeline import DEPS, OUTPUT_ENV, STAGES, Run, StageError

__all__ = [
    "BASELINES", "ConfigError", "DEPS", "ExperimentConfig", "OUTPUT_ENV", "Run", "STAGES", "StageError",
    "load_config", "parse_config", "validate",
]
