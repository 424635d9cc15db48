"""Configuration management for frachk."""

import copy
import json
import os
from pathlib import Path
from typing import Any

# Default configuration values
DEFAULT_CONFIG = {
    "grid_nodes": 2048,
    "scheme": "trapezoid",
    "sweep": {
        "relaxation": 0.5,
        "max_iterations": 500,
        "tolerance": 1e-6,
        "min_relaxation": 1e-3,
    },
    "output_dir": "runs",
    "mittag_leffler_budget": 50.0,
    "pmp_check_samples": 64,
    "parallel_compare": True,
}

SCHEMES = ("rectangle", "trapezoid")


def get_app_data_dir() -> Path:
    """
    Get application data directory.

    Returns:
        $FRACHK_HOME if set, otherwise $XDG_CONFIG_HOME/frachk (~/.config/frachk)
    """
    home = os.getenv("FRACHK_HOME")
    if home:
        return Path(home)
    base = os.getenv("XDG_CONFIG_HOME") or os.path.expanduser("~/.config")
    return Path(base) / "frachk"


def get_config_path() -> Path:
    """
    Get path to config.json file.

    Returns:
        Path to config.json
    """
    return get_app_data_dir() / "config.json"


def load_config() -> dict[str, Any]:
    """
    Load configuration from file, creating default if missing.

    Returns:
        Configuration dictionary
    """
    config_path = get_config_path()
    config_path.parent.mkdir(parents=True, exist_ok=True)

    if config_path.exists():
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise ValueError("config root must be an object")
            return validate_config(config)
        except (json.JSONDecodeError, ValueError, IOError):
            # Corrupted config is replaced with defaults
            config = copy.deepcopy(DEFAULT_CONFIG)
            save_config(config)
            return config

    config = copy.deepcopy(DEFAULT_CONFIG)
    save_config(config)
    return config


def save_config(config: dict[str, Any]) -> None:
    """
    Save configuration to file.

    Args:
        config: Configuration dictionary to save
    """
    config_path = get_config_path()
    config_path.parent.mkdir(parents=True, exist_ok=True)

    validated_config = validate_config(config)
    with open(config_path, "w", encoding="utf-8") as f:
        json.dump(validated_config, f, indent=2, ensure_ascii=False)


def _positive_number(value: Any, default: float, cast=float) -> float:
    try:
        number = cast(value)
    except (ValueError, TypeError):
        return default
    if not number > 0:
        return default
    return number


def validate_config(config: dict[str, Any]) -> dict[str, Any]:
    """
    Validate and normalize configuration values.

    Invalid values fall back to the defaults instead of raising.

    Args:
        config: Configuration dictionary to validate

    Returns:
        Validated configuration dictionary
    """
    validated = copy.deepcopy(DEFAULT_CONFIG)

    if "grid_nodes" in config:
        nodes = _positive_number(config["grid_nodes"], DEFAULT_CONFIG["grid_nodes"], int)
        validated["grid_nodes"] = nodes if nodes >= 2 else DEFAULT_CONFIG["grid_nodes"]

    if "scheme" in config:
        scheme = str(config["scheme"]).strip().lower()
        validated["scheme"] = scheme if scheme in SCHEMES else DEFAULT_CONFIG["scheme"]

    sweep = config.get("sweep")
    if isinstance(sweep, dict):
        defaults = DEFAULT_CONFIG["sweep"]
        result = validated["sweep"]
        if "relaxation" in sweep:
            result["relaxation"] = min(
                1.0, _positive_number(sweep["relaxation"], defaults["relaxation"])
            )
        if "min_relaxation" in sweep:
            result["min_relaxation"] = min(
                1.0, _positive_number(sweep["min_relaxation"], defaults["min_relaxation"])
            )
        if result["min_relaxation"] > result["relaxation"]:
            result["min_relaxation"] = min(defaults["min_relaxation"], result["relaxation"])
        if "max_iterations" in sweep:
            result["max_iterations"] = _positive_number(
                sweep["max_iterations"], defaults["max_iterations"], int
            )
        if "tolerance" in sweep:
            result["tolerance"] = _positive_number(sweep["tolerance"], defaults["tolerance"])

    if "output_dir" in config and config["output_dir"]:
        validated["output_dir"] = str(config["output_dir"])

    if "mittag_leffler_budget" in config:
        validated["mittag_leffler_budget"] = _positive_number(
            config["mittag_leffler_budget"], DEFAULT_CONFIG["mittag_leffler_budget"]
        )

    if "pmp_check_samples" in config:
        validated["pmp_check_samples"] = _positive_number(
            config["pmp_check_samples"], DEFAULT_CONFIG["pmp_check_samples"], int
        )

    if "parallel_compare" in config:
        validated["parallel_compare"] = bool(config["parallel_compare"])

    return validated
