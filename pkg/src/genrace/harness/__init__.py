"""Race runner: configuration, replicas, grid search, aggregation and CLI."""
from .config import ConfigError, RaceConfig, load_config, parse_config
from .grid import grid_search
from .race import RunExistsError, load_records, run_race

__all__ = [
    "ConfigError", "RaceConfig", "RunExistsError", "grid_search", "load_config",
    "load_records", "parse_config", "run_race",
]
