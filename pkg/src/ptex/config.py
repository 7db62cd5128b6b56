from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)


@dataclass
class PtexConfig:
    precision: int = 6
    mle_max_iter: int = 500
    mle_gtol: float = 1e-8
    regression_max_iter: int = 2000
    regression_gtol: float = 1e-6
    max_table_rows: int = 5000
    default_seed: int | None = None
    model_dir: str = "."
    no_color: bool = False
    cache_ttl: float = 900.0

    def __post_init__(self) -> None:
        if self.precision < 1:
            raise ValueError(f"precision must be >= 1, got {self.precision}")
        for name in ("mle_gtol", "regression_gtol", "cache_ttl"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("mle_max_iter", "regression_max_iter", "max_table_rows"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


def _user_config_dir() -> Path:
    if os.name == "nt":
        base = Path(os.environ.get("APPDATA", "~")).expanduser()
    else:
        base = Path(os.environ.get("XDG_CONFIG_HOME", "~/.config")).expanduser()
    return base / "ptex"


def find_config_file() -> Path | None:
    """Return the first existing configuration file, or None.

    Search order:
      1. $PTEX_CONFIG env var (path to a JSON file)
      2. ./config/config.json relative to CWD
      3. Platform user config dir (~/.config/ptex or %APPDATA%/ptex)
    """
    env = os.environ.get("PTEX_CONFIG")
    if env:
        return Path(env)

    for candidate in (
        Path.cwd() / "config" / "config.json",
        _user_config_dir() / "config.json",
    ):
        if candidate.exists():
            return candidate
    return None


def _substitute_env_vars(obj: object) -> object:
    """Recursively replace ${ENV_VAR} patterns in strings with env var values."""
    if isinstance(obj, str):
        return re.sub(
            r"\$\{(\w+)\}",
            lambda m: os.environ.get(m.group(1), m.group(0)),
            obj,
        )
    if isinstance(obj, dict):
        return {k: _substitute_env_vars(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_substitute_env_vars(v) for v in obj]
    return obj


def _coerce(name: str, value: Any) -> Any:
    # ${VAR} substitution leaves strings behind; bring them back to the field type
    if not isinstance(value, str):
        return value
    if name in ("precision", "mle_max_iter", "regression_max_iter", "max_table_rows"):
        return int(value)
    if name in ("mle_gtol", "regression_gtol", "cache_ttl"):
        return float(value)
    if name == "default_seed":
        return int(value) if value.strip() else None
    if name == "no_color":
        return value.strip().lower() in ("1", "true", "yes", "on")
    return value


def load_config(path: str | Path | None = None) -> PtexConfig:
    """Load configuration from a JSON file, falling back to defaults."""
    config_path = Path(path) if path is not None else find_config_file()

    data: dict[str, Any] = {}
    loaded = config_path is not None and config_path.exists()
    if loaded:
        logger.info("Loading config from %s", config_path)
        with open(config_path) as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ValueError(f"{config_path}: top-level JSON value must be an object")
        data = _substitute_env_vars(raw)  # type: ignore[assignment]
    else:
        logger.info("No config file found, using defaults")

    known = {f.name for f in fields(PtexConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        logger.warning("Ignoring unknown config keys: %s", ", ".join(unknown))

    config = PtexConfig(**{k: _coerce(k, v) for k, v in data.items() if k in known})

    if os.environ.get("PTEX_NO_COLOR"):
        config.no_color = True

    model_dir = Path(config.model_dir).expanduser()
    if not model_dir.is_absolute() and loaded:
        # Relative model_dir resolves against the directory holding the config
        assert config_path is not None
        model_dir = config_path.parent / model_dir
    config.model_dir = str(model_dir)

    return config
