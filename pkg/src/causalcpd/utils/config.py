"""Centralized configuration management for the application."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from causalcpd.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)


def normalize_key(key: str) -> str:
    """Config-file keys may be written like flags (``tau-ub``) or fields (``tau_ub``)."""
    return key.strip().lstrip("-").replace("-", "_").lower()


class Configuration:
    """
    Centralized configuration management.

    Resolution order, lowest to highest: built-in defaults, ``CAUSAL_CPD_*``
    environment variables, a loaded config file, explicit command-line flags
    (the CLI records a given flag through :meth:`set`).
    """

    # Default configuration values
    _defaults = {
        # Parallelism
        "threads": 1,
        # Discovery
        "tau_ub": 5,
        "alpha_level": 0.01,
        "n_intervals": 2,
        "pc_max_conds": 3,
        "min_samples_factor": 20,
        # Divergence
        "alpha": 0.1,
        "nw": 50,
        "nst": 1,
        "estimator": "plugin",
        "ridge": 0.01,
        "max_centers": 100,
        "sigma_floor": 0.1,
        "cross_validate": False,
        # Detector
        "refine": False,
        # Generator
        "n": 3,
        "t": 6000,
        "tau_max": 4,
        "spa": 3,
        "kind": "soft",
        "min_divergence": 0.02,
        "domain": "0,1",
        "seed": 0,
        # Evaluation
        "trials": 100,
        "q": "10,25,50,100,200",
        "methods": "causal-rulsif,mean-change",
        "oracle_spa": False,
    }

    # Environment variable prefix
    _env_prefix = "CAUSAL_CPD_"

    # Instance for singleton pattern
    _instance = None

    @classmethod
    def get_instance(cls) -> "Configuration":
        """Get the singleton configuration instance."""
        if cls._instance is None:
            cls._instance = Configuration()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """Drop the singleton so the next access re-reads the environment."""
        cls._instance = None

    def __init__(self):
        """Initialize configuration with defaults and environment variables."""
        self._config: Dict[str, Any] = dict(self._defaults)
        self._sources: Dict[str, str] = {key: "default" for key in self._defaults}
        self._load_from_env()

    def _coerce(self, key: str, raw: Any, origin: str) -> Optional[Any]:
        """Convert ``raw`` to the type of the default for ``key``; None when invalid."""
        default_value = self._defaults.get(key)
        if default_value is None or raw is None:
            return raw
        # Sweep flags (--t, --spa, --nw) take comma lists where a single int is the default.
        if isinstance(raw, (list, tuple)):
            return ",".join(str(v) for v in raw)
        if isinstance(raw, str) and "," in raw and not isinstance(default_value, bool):
            return raw.strip()
        if isinstance(default_value, bool):
            if isinstance(raw, bool):
                return raw
            return str(raw).lower() in ("true", "1", "yes", "y", "t")
        if isinstance(default_value, int):
            try:
                return int(raw)
            except (TypeError, ValueError):
                logger.warning(f"Invalid value for {origin}: {raw!r} (expected int)")
                return None
        if isinstance(default_value, float):
            try:
                return float(raw)
            except (TypeError, ValueError):
                logger.warning(f"Invalid value for {origin}: {raw!r} (expected float)")
                return None
        return str(raw)

    def _load_from_env(self) -> None:
        """Load configuration from environment variables."""
        for key in self._defaults.keys():
            env_key = f"{self._env_prefix}{key.upper()}"
            if env_key in os.environ:
                value = self._coerce(key, os.environ[env_key], env_key)
                if value is not None:
                    self._config[key] = value
                    self._sources[key] = "env"

    def load_file(self, path: Path) -> Dict[str, Any]:
        """
        Merge a JSON config file (one key per flag) into the configuration.

        A run manifest is accepted as well: its ``config`` section is used.

        Args:
            path: Path to the JSON document

        Returns:
            The normalized key/value pairs read from the file
        """
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigurationError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigurationError(f"Config file {path} must hold a JSON object")
        if "config" in document and isinstance(document["config"], dict):
            document = document["config"]

        loaded: Dict[str, Any] = {}
        for raw_key, raw_value in document.items():
            key = normalize_key(raw_key)
            value = self._coerce(key, raw_value, f"{path}:{raw_key}")
            if value is None and raw_value is not None:
                continue
            self._config[key] = value
            self._sources[key] = "file"
            loaded[key] = value
        logger.debug(f"Loaded {len(loaded)} configuration keys from {path}")
        return loaded

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            key: Configuration key
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        return self._config.get(normalize_key(key), default)

    def source(self, key: str) -> str:
        """Where the current value of ``key`` came from: default, env, file or flag."""
        return self._sources.get(normalize_key(key), "default")

    def set(self, key: str, value: Any, source: str = "flag") -> None:
        """
        Set a configuration value.

        Args:
            key: Configuration key
            value: Configuration value
            source: Provenance recorded for the manifest
        """
        key = normalize_key(key)
        self._config[key] = value
        self._sources[key] = source


# Global helper functions for easy access to the configuration
def get_config(key: str, default: Any = None) -> Any:
    """
    Get a configuration value.

    Args:
        key: Configuration key
        default: Default value if key not found

    Returns:
        Configuration value or default
    """
    return Configuration.get_instance().get(key, default)


def set_config(key: str, value: Any) -> None:
    """
    Set a configuration value.

    Args:
        key: Configuration key
        value: Configuration value
    """
    Configuration.get_instance().set(key, value)


def resolve_threads(flag_value: Optional[int] = None) -> int:
    """Worker count: ``--threads`` flag, else config/``CAUSAL_CPD_THREADS``, at least 1."""
    value = flag_value if flag_value is not None else get_config("threads", 1)
    try:
        return max(1, int(value))
    except (TypeError, ValueError):
        logger.warning(f"Ignoring invalid thread count {value!r}")
        return 1
