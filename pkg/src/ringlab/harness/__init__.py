from .config import DEFAULTS, EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .experiments import RunManifest, SweepTable, run_experiment, sweep_delta

__all__ = ["DEFAULTS", "EXPERIMENTS", "ConfigError", "ExperimentConfig", "RunManifest",
           "SweepTable", "load_config", "run_experiment", "sweep_delta"]
