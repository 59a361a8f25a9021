"""
Configuration loader with multi-source support.
"""
import logging
import os
from pathlib import Path

import yaml
from dotenv import dotenv_values
from pydantic import ValidationError

from marchenko_lab.config.settings import Settings

logger = logging.getLogger(__name__)

_cached_settings = None

ENV_PREFIX = "MARCHENKO_"


def user_config_path() -> Path:
    return Path.home() / ".marchenko" / "config.yaml"


def load_settings(reload: bool = False) -> Settings:
    """
    Load settings from multiple sources with precedence:
    1. MARCHENKO_* environment variables (highest priority)
    2. ~/.marchenko/config.yaml
    3. .env file in the working directory
    4. Defaults (lowest priority)

    Args:
        reload: Force reload settings from disk

    Returns:
        Settings instance
    """
    global _cached_settings

    if _cached_settings is not None and not reload:
        return _cached_settings

    settings_data = {}

    env_file = Path(".env")
    if env_file.exists():
        for key, value in dotenv_values(env_file).items():
            if key.startswith(ENV_PREFIX) and value is not None:
                settings_data[key[len(ENV_PREFIX):].lower()] = value
        logger.debug("Loaded .env file")

    home_config = user_config_path()
    if home_config.exists():
        try:
            with open(home_config, "r") as f:
                settings_data.update(yaml.safe_load(f) or {})
            logger.debug(f"Loaded config from {home_config}")
        except (OSError, yaml.YAMLError) as e:
            logger.warning(f"Error loading {home_config}: {e}")

    for field in Settings.model_fields:
        value = os.environ.get(ENV_PREFIX + field.upper())
        if value is not None:
            settings_data[field] = value

    try:
        _cached_settings = Settings.from_dict(settings_data)
    except ValidationError as e:
        logger.warning(f"Invalid settings ignored: {e}")
        _cached_settings = Settings()

    logger.debug(f"Settings loaded: {_cached_settings}")
    return _cached_settings


def save_config(config_data: dict, target: str = "user") -> Path:
    """
    Save configuration to file.

    Args:
        config_data: Configuration dictionary
        target: "user" for ~/.marchenko/config.yaml, "local" for ./.env

    Returns:
        Path written
    """
    if target == "user":
        config_path = user_config_path()
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w") as f:
            yaml.dump(config_data, f, default_flow_style=False)
    elif target == "local":
        config_path = Path(".env")
        lines = [f"{ENV_PREFIX}{key.upper()}={value}\n" for key, value in config_data.items()]
        with open(config_path, "w") as f:
            f.writelines(lines)
    else:
        raise ValueError(f"unknown config target '{target}'")

    logger.info(f"Saved config to {config_path}")
    return config_path
