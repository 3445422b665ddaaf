from .config import ConfigError, ExperimentConfig, build_config, load_config
from .cost import CostQuery, CostReport, cost_compare, expand_keystream
from .experiment import ExperimentResult, run_experiment
from .transcript_io import TRANSCRIPT_SCHEMA, verify_records

__all__ = [
    "ConfigError",
    "CostQuery",
    "CostReport",
    "ExperimentConfig",
    "ExperimentResult",
    "TRANSCRIPT_SCHEMA",
    "build_config",
    "cost_compare",
    "expand_keystream",
    "load_config",
    "run_experiment",
    "verify_records",
]
