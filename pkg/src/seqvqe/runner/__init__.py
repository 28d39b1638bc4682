"""Experiment pipelines, configuration and CLI."""

from .config import RunConfig, load_config
from .pipelines import COMMANDS, cmd_exact, cmd_rate_check, cmd_sweep, cmd_vqe, cmd_zne_study

__all__ = [
    "COMMANDS",
    "RunConfig",
    "cmd_exact",
    "cmd_rate_check",
    "cmd_sweep",
    "cmd_vqe",
    "cmd_zne_study",
    "load_config",
]
