"""Experiment configuration, deterministic targets and the artifact runner."""

from .checks import CHECKS, CheckResult, run_checks
from .config import ConfigError, ExperimentConfig, apply_overrides, parse_override
from .run import EXIT_ASSERT, EXIT_CONFIG, EXIT_GUARD, EXIT_PASS, run
from .targets import generate_pressure_target, generate_target, reference_pair

__all__ = [
    "CHECKS",
    "CheckResult",
    "run_checks",
    "ConfigError",
    "ExperimentConfig",
    "apply_overrides",
    "parse_override",
    "EXIT_ASSERT",
    "EXIT_CONFIG",
    "EXIT_GUARD",
    "EXIT_PASS",
    "run",
    "generate_pressure_target",
    "generate_target",
    "reference_pair",
]
