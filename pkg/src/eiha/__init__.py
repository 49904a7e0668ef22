"""Learning of turn-taking games from interaction histories, in simulation."""

from .config import ConfigError, EihaConfig, load_config, serialize_config

__version__ = "0.1.0"

__all__ = ["EihaConfig", "ConfigError", "load_config", "serialize_config",
           "__version__"]
