"""
Configuration loader module for powgame.

Handles loading and validation of the global settings file, scenario
files and controller specs, with environment variable interpolation.
"""

import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml
from dotenv import load_dotenv

from powgame.controller import ControllerSpec
from powgame.exceptions import ConfigError
from powgame.utils.validation import (
    ScenarioConfig,
    apply_overrides,
    normalize_scenario,
    validate_scenario,
)

PACKAGE_CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
SCENARIO_DIR = PACKAGE_CONFIG_DIR / "scenarios"

DEFAULT_GLOBAL_CONFIG: Dict[str, Any] = {
    "logging": {"level": "INFO"},
    "numerics": {"dt": 1e-3, "tol": 1e-6, "t_max": 1000.0, "max_steps": 10_000_000},
    "csv": {"significant_digits": 17},
}

_ENV_PATTERN = re.compile(r"\$\{([^}]+)\}")
CONTROLLER_KEYS = ("m", "n", "d", "R_star", "x_bar", "K", "eps")


def load_global_config(path: Optional[str] = None) -> Dict[str, Any]:
    """Load global settings with environment support.

    Loads a .env file if present, then reads config/global_{POWGAME_ENV}.yaml
    (POWGAME_ENV defaults to "default") from the working directory, falling
    back to the copy shipped with the package.

    Args:
        path: Explicit settings file; skips the environment lookup.

    Returns:
        Settings dictionary with logging, numerics and csv sections.

    Raises:
        ConfigError: If the file is missing, not valid YAML or malformed.

    Examples:
        >>> config = load_global_config()
        >>> config["numerics"]["dt"]
        0.001
    """
    load_dotenv(override=False)

    if path is None:
        env = os.getenv("POWGAME_ENV", "default")
        candidates = [Path("config") / f"global_{env}.yaml", PACKAGE_CONFIG_DIR / f"global_{env}.yaml"]
        found = next((p for p in candidates if p.exists()), None)
        if found is None:
            raise ConfigError(f"Global config for environment '{env}' not found in: {[str(p) for p in candidates]}")
        config_path = found
    else:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")

    config = _read_yaml(config_path, "config")
    config = _interpolate_env_vars(config)
    return _validate_global_config(config)


def _validate_global_config(config: Dict[str, Any]) -> Dict[str, Any]:
    """Merge settings over the defaults and check the numeric fields."""
    if not isinstance(config, dict):
        raise ConfigError("Global config must be a mapping")
    result: Dict[str, Any] = {}
    for section, defaults in DEFAULT_GLOBAL_CONFIG.items():
        given = config.get(section) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"Section '{section}' must be a mapping")
        result[section] = {**defaults, **given}

    numerics = result["numerics"]
    for key in ("dt", "tol", "t_max"):
        try:
            numerics[key] = float(numerics[key])
        except (TypeError, ValueError):
            raise ConfigError(f"numerics.{key} must be a number, got: {numerics[key]}")
        if numerics[key] <= 0:
            raise ConfigError(f"numerics.{key} must be positive, got: {numerics[key]}")
    if not isinstance(numerics["max_steps"], int) or numerics["max_steps"] < 1:
        raise ConfigError(f"numerics.max_steps must be a positive integer, got: {numerics['max_steps']}")
    if result["csv"]["significant_digits"] != 17:
        raise ConfigError("csv.significant_digits is fixed at 17 for exact round-tripping")
    return result


def _interpolate_env_vars(obj: Any) -> Any:
    """Recursively interpolate environment variables in config values.

    Replaces ${VAR} or ${VAR:-default} with environment variable values.
    """
    if isinstance(obj, dict):
        return {key: _interpolate_env_vars(value) for key, value in obj.items()}
    if isinstance(obj, list):
        return [_interpolate_env_vars(item) for item in obj]
    if isinstance(obj, str):
        def replace_var(match: "re.Match[str]") -> str:
            var_expr = match.group(1)
            if ":-" in var_expr:
                var_name, default_value = var_expr.split(":-", 1)
                return os.getenv(var_name, default_value)
            return os.getenv(var_expr, match.group(0))

        return _ENV_PATTERN.sub(replace_var, obj)
    return obj


def load_scenario(
    path: str,
    overrides: Sequence[str] = (),
    defaults: Optional[Dict[str, Any]] = None,
) -> ScenarioConfig:
    """Load, override, normalize and validate a scenario file.

    Args:
        path: Scenario YAML file, or the name of a bundled scenario.
        overrides: 'section.key=value' strings applied after loading.
        defaults: Run settings used where the scenario leaves them out.

    Raises:
        ConfigError: If the file is missing, not valid YAML or fails validation.

    Examples:
        >>> cfg = load_scenario("fig3_blue")
        >>> cfg.reward.R
        40.0
    """
    scenario_path = resolve_scenario_path(path)
    raw = _read_yaml(scenario_path, "scenario")
    if not isinstance(raw, dict):
        raise ConfigError(f"Scenario file {scenario_path} must contain a mapping")
    raw = _interpolate_env_vars(raw)
    raw = apply_overrides(raw, overrides)
    if defaults:
        raw = normalize_scenario(raw, defaults)
    return validate_scenario(raw)


def resolve_scenario_path(path: str) -> Path:
    """A file path as given, else a bundled scenario of that name."""
    candidate = Path(path)
    if candidate.exists():
        return candidate
    bundled = SCENARIO_DIR / f"{path}.yaml"
    if bundled.exists():
        return bundled
    raise ConfigError(f"Scenario file not found: {path}. Bundled scenarios: {list_bundled_scenarios()}")


def list_bundled_scenarios() -> List[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def load_controller_spec(path: str) -> ControllerSpec:
    """Read a controller spec file with keys m, n, d, R_star, x_bar, K, eps."""
    spec_path = Path(path)
    if not spec_path.exists():
        raise ConfigError(f"Controller spec not found: {spec_path}")
    data = _read_yaml(spec_path, "controller spec")
    if not isinstance(data, dict):
        raise ConfigError(f"Controller spec {spec_path} must contain a mapping")
    missing = [k for k in CONTROLLER_KEYS if k not in data]
    if missing:
        raise ConfigError(f"Controller spec {spec_path} missing keys: {missing}")
    try:
        return ControllerSpec.from_dict(data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid controller spec {spec_path}: {e}") from e


def dump_controller_spec(spec: ControllerSpec) -> str:
    """YAML text of a controller spec, keys in canonical order."""
    data = spec.to_dict()
    return yaml.safe_dump({k: data[k] for k in CONTROLLER_KEYS}, sort_keys=False)


def _read_yaml(path: Path, what: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark is not None else ""
        raise ConfigError(f"Invalid YAML in {what} file {path}{where}: {e}") from e
