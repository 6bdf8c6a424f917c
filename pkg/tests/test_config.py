from pathlib import Path

import pytest

from mchec.config import DEFAULTS, load_config, resolve, section, solver_options_from
from mchec.errors import ConfigError
from mchec.solver import SolverOptions


def write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


def test_missing_file_is_empty(tmp_path: Path) -> None:
    assert load_config(tmp_path / "absent.toml") == {}


def test_tables_are_loaded(tmp_path: Path) -> None:
    cfg = load_config(write(tmp_path, "[solver]\ncauchy_scale = 2.5\n\n[synth]\npreset = \"small\"\n"))
    assert cfg["solver"]["cauchy_scale"] == 2.5
    assert cfg["synth"]["preset"] == "small"


@pytest.mark.parametrize(
    "text, message",
    [
        ("[solver\n", "config.toml"),
        ("[plotting]\nx = 1\n", "unknown table"),
        ("[solver]\nlambda = 3\n", "lambda"),
        ("solver = 3\n", "must be a table"),
    ],
)
def test_bad_config(tmp_path: Path, text: str, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        load_config(write(tmp_path, text))


def test_resolve_precedence() -> None:
    assert resolve(1, 2, 3) == 1
    assert resolve(None, 2, 3) == 2
    assert resolve(None, None, 3) == 3
    assert resolve(False, True, True) is False


def test_section_fills_defaults() -> None:
    synth = section({"synth": {"cameras": 6}}, "synth")
    assert synth["cameras"] == 6
    assert synth["poses"] == DEFAULTS["synth"]["poses"]


def test_solver_defaults_match_options() -> None:
    assert solver_options_from({}) == SolverOptions()


def test_cli_overrides_config() -> None:
    cfg = {"solver": {"cauchy_scale": 2.0, "max_iterations": 10}}
    options = solver_options_from(cfg, cauchy_scale=4.0, cross_term_enabled=False)
    assert options.cauchy_scale == 4.0
    assert options.max_iterations == 10
    assert not options.cross_term_enabled


def test_invalid_option_value() -> None:
    with pytest.raises(ConfigError, match="cauchy_scale"):
        solver_options_from({"solver": {"cauchy_scale": -1.0}})
