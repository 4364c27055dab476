"""Configuration loader for VeloNet odometry with OS-standard locations.

Settings are resolved in this order (highest first):
1. Explicit CLI flags
2. A `--config` file of line-based `key=value` pairs
3. The YAML config file (sections: model, training, pdr, synthetic, evaluation, logging)
4. Dataclass defaults

Config locations:
- VELONET_CONFIG_PATH env var, if set
- ./config/ when running from within the repo
- macOS: ~/Library/Application Support/velonet-odometry/config.yaml
- Linux: ~/.config/velonet-odometry/config.yaml
- Windows: %LOCALAPPDATA%\\velonet-odometry\\config.yaml
"""

import dataclasses
import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional, get_type_hints

import platformdirs
import yaml
from dotenv import dotenv_values, load_dotenv

from src.core.errors import ContractViolation

logger = logging.getLogger(__name__)

APP_NAME = "velonet-odometry"

# Sections understood in config.yaml
KNOWN_SECTIONS = [
    "model",
    "training",
    "pdr",
    "synthetic",
    "evaluation",
    "logging",
]


def get_config_dir() -> Path:
    """
    Get the configuration directory.

    Detection logic (in order of priority):
    1. If VELONET_CONFIG_PATH env var is set: use that directory
    2. If repo-local config exists (./config/): use that (dev/test scenarios)
    3. Otherwise: platformdirs user config dir for the application

    Returns:
        Path to configuration directory (not created)
    """
    if env_override := os.getenv("VELONET_CONFIG_PATH"):
        return Path(env_override)
    if (repo_local := Path("./config")).exists():
        return repo_local
    return Path(platformdirs.user_config_dir(APP_NAME, appauthor=False))


def get_config_path() -> Path:
    """
    Get the path to the YAML configuration file.

    VELONET_CONFIG_FILE selects an alternative filename (e.g. 'config.test.yaml').
    """
    config_filename = os.getenv("VELONET_CONFIG_FILE", "config.yaml")
    return get_config_dir() / config_filename


def load_config(file_path: Optional[Path] = None) -> dict[str, Any]:
    """
    Load configuration from YAML file.

    Args:
        file_path: Path to config file. Defaults to the resolved location.

    Returns:
        Dictionary of sections, or empty dict if the file is missing or unreadable.
    """
    if file_path is None:
        file_path = get_config_path()

    if not file_path.exists():
        return {}

    try:
        with open(file_path, "r") as f:
            config = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.warning(f"Ignoring unreadable config file {file_path}: {e}")
        return {}

    if not isinstance(config, dict):
        logger.warning(f"Ignoring config file {file_path}: top level is not a mapping")
        return {}

    unknown = set(config) - set(KNOWN_SECTIONS)
    if unknown:
        logger.warning(f"Config file {file_path} has unknown sections: {sorted(unknown)}")
    return config


def section_settings(section: str, config: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    """Return one section of the YAML config (empty dict when absent)."""
    if config is None:
        config = load_config()
    values = config.get(section) or {}
    return dict(values) if isinstance(values, dict) else {}


def load_environment_variables() -> None:
    """
    Load ./.env into the process environment without overriding existing variables.

    Only the current working directory is consulted; shell variables always win.
    """
    env_path = Path.cwd() / ".env"
    if env_path.exists():
        load_dotenv(env_path, override=False)


def load_overrides_file(path: Path) -> dict[str, str]:
    """
    Parse a line-based key=value overrides file (the CLI --config option).

    Blank lines and '#' comments are ignored. Keys are normalised to
    lowercase with underscores.
    """
    if not Path(path).exists():
        raise ContractViolation(f"Config overrides file not found: {path}")
    raw = dotenv_values(path)
    overrides = {}
    for key, value in raw.items():
        if value is None:
            raise ContractViolation(f"Config overrides file {path}: '{key}' has no value")
        overrides[key.strip().lower().replace("-", "_")] = value.strip()
    return overrides


def coerce_value(value: Any, target_type: Any) -> Any:
    """Coerce a YAML/key=value setting to a dataclass field type."""
    if isinstance(value, str):
        if target_type is bool:
            lowered = value.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ContractViolation(f"Cannot interpret '{value}' as a boolean")
        if target_type is int:
            return int(value)
        if target_type is float:
            return float(value)
        if getattr(target_type, "__origin__", None) in (list, tuple):
            return [int(v) for v in value.replace(" ", "").split(",") if v]
        return value
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def build_dataclass(cls, *layers: Mapping[str, Any], **explicit: Any):
    """
    Instantiate a config dataclass from layered settings.

    Later layers win over earlier ones; `explicit` values that are not None win
    over every layer. Keys not naming a field of `cls` are skipped, which lets
    one overrides file feed several dataclasses.
    """
    hints = get_type_hints(cls)
    field_names = {f.name for f in dataclasses.fields(cls)}
    values: dict[str, Any] = {}
    for layer in layers:
        for key, value in (layer or {}).items():
            if key in field_names:
                values[key] = coerce_value(value, hints[key])
    for key, value in explicit.items():
        if value is None:
            continue
        if key not in field_names:
            raise ContractViolation(f"{cls.__name__} has no setting '{key}'")
        values[key] = coerce_value(value, hints[key])
    return cls(**values)
