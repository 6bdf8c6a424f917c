"""Config file loading and resolution."""

import sys
from pathlib import Path
from typing import Any

from mchec.errors import ConfigError
from mchec.solver import SolverOptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_CONFIG_PATH = Path.home() / ".config" / "mchec" / "config.toml"

DEFAULTS: dict[str, dict[str, Any]] = {
    "solver": {
        "max_iterations": 100,
        "gradient_tolerance": 1e-10,
        "parameter_tolerance": 1e-10,
        "cost_tolerance": 1e-12,
        "cauchy_scale": 1.0,
        "cross_term_enabled": True,
        "shared_z_enabled": True,
    },
    "synth": {
        "preset": "large",
        "cameras": 4,
        "poses": 30,
        "radius": None,
        "sigma": 0.5,
        "dropout": 0.1,
        "seed": 0,
    },
}


def load_config(path: Path | None = None) -> dict[str, Any]:
    """Load config from TOML file. Returns empty dict if file doesn't exist."""
    config_path = path or DEFAULT_CONFIG_PATH
    if not config_path.exists():
        return {}
    try:
        with open(config_path, "rb") as f:
            cfg = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{config_path}: {e}") from e
    for table in cfg:
        if table not in DEFAULTS:
            raise ConfigError(f"{config_path}: unknown table [{table}]")
        if not isinstance(cfg[table], dict):
            raise ConfigError(f"{config_path}: '{table}' must be a table")
        unknown = sorted(set(cfg[table]) - set(DEFAULTS[table]))
        if unknown:
            raise ConfigError(f"{config_path}: unknown key(s) in [{table}]: {', '.join(unknown)}")
    return cfg


def resolve(cli_value: Any, config_value: Any, default: Any) -> Any:
    """Resolve a setting with precedence: CLI flag > config file > default."""
    if cli_value is not None:
        return cli_value
    if config_value is not None:
        return config_value
    return default


def section(cfg: dict[str, Any], name: str) -> dict[str, Any]:
    """One config table with every key resolved against DEFAULTS."""
    table = cfg.get(name, {})
    return {key: resolve(None, table.get(key), default) for key, default in DEFAULTS[name].items()}


def solver_options_from(cfg: dict[str, Any], **cli_overrides: Any) -> SolverOptions:
    """SolverOptions from the [solver] table, with CLI values (None = not given) on top."""
    table = cfg.get("solver", {})
    values = {
        key: resolve(cli_overrides.get(key), table.get(key), default)
        for key, default in DEFAULTS["solver"].items()
    }
    try:
        return SolverOptions(**values)
    except TypeError as e:
        raise ConfigError(f"invalid solver option: {e}") from e
