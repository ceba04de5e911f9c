"""Multi-agent search for drifting targets: ergodic steering from a screened
Poisson potential over a transported target-probability field."""

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .scenario import RunResult, ScenarioError, run, sweep_lambda

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "ScenarioError",
    "load_config",
    "parse_config",
    "run",
    "sweep_lambda",
]
