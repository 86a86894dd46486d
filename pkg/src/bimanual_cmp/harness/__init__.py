"""Scenario runner: configuration, the demonstrate/learn/replay pipeline, logs, plots and CLI."""

from .config import ConfigError, ScenarioConfig, load_robot_model, load_scenario, parse_scenario
from .logs import RunMetrics, metrics_from_log, read_csv, write_csv
from .scenario import (Comparison, LearningError, compare_variants, demonstrate, learn, replay,
                       simulate)

__all__ = [
    "ConfigError", "ScenarioConfig", "load_robot_model", "load_scenario", "parse_scenario",
    "RunMetrics", "metrics_from_log", "read_csv", "write_csv",
    "Comparison", "LearningError", "compare_variants", "demonstrate", "learn", "replay", "simulate",
]
