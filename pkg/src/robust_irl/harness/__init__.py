"""Scenario orchestration: configuration, episodes, metrics, CSV output and the CLI."""
from .config import ConfigError, ScenarioConfig
from .episode import COLUMNS, EpisodeResult, run_episode

__all__ = ["COLUMNS", "ConfigError", "EpisodeResult", "ScenarioConfig", "run_episode"]
