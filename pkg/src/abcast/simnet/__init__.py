"""Discrete-event simulation, adversaries, load and metrics."""

from .config import ScenarioConfig, load_config
from .runner import RunResult, ScenarioRunner, run_scenario
from .sim import Simulator

__all__ = ["RunResult", "ScenarioConfig", "ScenarioRunner", "Simulator", "load_config", "run_scenario"]
