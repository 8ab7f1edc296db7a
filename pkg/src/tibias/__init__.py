"""Discrete-event simulator for socially-aware congestion control."""

from .config import ConfigError, ScenarioConfig, load_scenario, parse_scenario
from .metrics import MetricsRecord
from .network import Simulation, run

__all__ = ["ConfigError", "MetricsRecord", "ScenarioConfig", "Simulation",
           "load_scenario", "parse_scenario", "run"]
