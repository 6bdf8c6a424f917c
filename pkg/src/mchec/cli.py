"""Entry point: click command group, config resolution, exit codes."""

import json
import logging
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import replace
from functools import wraps
from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.logging import RichHandler

from mchec import __version__
from mchec.config import load_config, resolve, section, solver_options_from
from mchec.dataset import load_dataset
from mchec.errors import ConfigError, FormatError, MchecError, NumericalFailure, ValidationError
from mchec.metrics import comparison_record, compare_methods, evaluate, load_ground_truth, report_record, sweep_record
from mchec.render import (
    comparison_table,
    render_comparison,
    render_error,
    render_metrics,
    render_result,
    render_sweep,
    render_visibility,
    sweep_table,
    table_text,
)
from mchec.results import RESULT_FILE, load_result, save_result
from mchec.solver import calibrate
from mchec.sweep import seed_sweep
from mchec.synthgen import SynthConfig, generate, preset

EXIT_IO = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

METRICS_FILE = "metrics.json"
COMPARISON_TEXT = "comparison.txt"
COMPARISON_JSON = "comparison.json"

logger = logging.getLogger(__name__)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map library errors to exit codes at the command boundary."""
    try:
        yield
    except (ValidationError, FormatError, ConfigError) as e:
        render_error(str(e))
        raise SystemExit(EXIT_INVALID) from e
    except NumericalFailure as e:
        render_error(str(e))
        raise SystemExit(EXIT_NOT_CONVERGED) from e
    except MchecError as e:
        render_error(str(e))
        raise SystemExit(EXIT_INVALID) from e
    except OSError as e:
        render_error(str(e))
        raise SystemExit(EXIT_IO) from e


def common_options(f: Callable[..., Any]) -> Callable[..., Any]:
    @click.option(
        "--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Path to config file (default: ~/.config/mchec/config.toml).",
    )
    @click.option("-v", "--verbose", is_flag=True, help="Log solver iterations and initialization details.")
    @wraps(f)
    def wrapper(*args: Any, config_path: Path | None, verbose: bool, **kwargs: Any) -> Any:
        _setup_logging(verbose)
        with _exit_codes():
            cfg = load_config(config_path)
            return f(*args, cfg=cfg, **kwargs)

    return wrapper


def solver_options(f: Callable[..., Any]) -> Callable[..., Any]:
    @click.option("--cauchy-scale", default=None, type=float, help="Cauchy loss scale in pixels (default: 1.0).")
    @click.option("--no-cross", is_flag=True, help="Disable the cross-camera residual term.")
    @click.option("--independent-z", is_flag=True, help="Give every camera its own board-to-end-effector transform.")
    @click.option("--max-iters", default=None, type=int, help="Levenberg-Marquardt iteration cap (default: 100).")
    @wraps(f)
    def wrapper(
        *args: Any, cauchy_scale: float | None, no_cross: bool, independent_z: bool, max_iters: int | None,
        cfg: dict[str, Any], **kwargs: Any,
    ) -> Any:
        options = solver_options_from(
            cfg,
            cauchy_scale=cauchy_scale,
            cross_term_enabled=False if no_cross else None,
            shared_z_enabled=False if independent_z else None,
            max_iterations=max_iters,
        )
        return f(*args, cfg=cfg, options=options, **kwargs)

    return wrapper


def synth_options(f: Callable[..., Any]) -> Callable[..., Any]:
    @click.option("--preset", "preset_name", default=None, help="Workcell size: small, medium or large (default: large).")
    @click.option("--cameras", default=None, type=int, help="Number of cameras on the ring (default: 4).")
    @click.option("--poses", default=None, type=int, help="Number of robot poses (default: 30).")
    @click.option("--radius", default=None, type=float, help="Camera ring radius in meters (overrides the preset).")
    @click.option("--sigma", default=None, type=float, help="Pixel noise standard deviation (default: 0.5).")
    @click.option("--dropout", default=None, type=float, help="Probability a visible board is missed (default: 0.1).")
    @click.option("--seed", default=None, type=click.IntRange(0, 2**64 - 1), help="64-bit generator seed (default: 0).")
    @wraps(f)
    def wrapper(
        *args: Any, preset_name: str | None, cameras: int | None, poses: int | None, radius: float | None,
        sigma: float | None, dropout: float | None, seed: int | None, cfg: dict[str, Any], **kwargs: Any,
    ) -> Any:
        table = cfg.get("synth", {})
        defaults = section(cfg, "synth")
        base = preset(resolve(preset_name, table.get("preset"), defaults["preset"]))
        radius = resolve(radius, table.get("radius"), None)
        config = replace(
            base,
            n_cameras=resolve(cameras, table.get("cameras"), defaults["cameras"]),
            n_poses=resolve(poses, table.get("poses"), defaults["poses"]),
            radius=base.radius if radius is None else radius,
            pixel_noise_sigma=resolve(sigma, table.get("sigma"), defaults["sigma"]),
            detection_dropout=resolve(dropout, table.get("dropout"), defaults["dropout"]),
            seed=resolve(seed, table.get("seed"), defaults["seed"]),
        )
        return f(*args, cfg=cfg, synth=config, **kwargs)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="mchec")
def main() -> None:
    """mchec: multi-camera hand-eye calibration with a shared board transform."""


@main.command("synth")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Dataset directory to write.")
@common_options
@synth_options
def cmd_synth(out: Path, cfg: dict[str, Any], synth: SynthConfig) -> None:
    """Generate a synthetic workcell dataset with ground truth."""
    output = generate(synth)
    output.write(out)
    render_visibility(output.visibility_stats, len(output.dataset.co_visible_pairs()), output.dataset.n_poses)
    click.echo(f"Wrote {out}")


@main.command("calibrate")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(path_type=Path), help="Dataset directory.")
@click.option("--out", default=None, type=click.Path(dir_okay=False, path_type=Path), help="Result file (default: <dataset>/result.json).")
@common_options
@solver_options
def cmd_calibrate(dataset_dir: Path, out: Path | None, cfg: dict[str, Any], options) -> None:
    """Jointly estimate every camera's hand-eye transform."""
    out = out or dataset_dir / RESULT_FILE
    dataset = load_dataset(dataset_dir)
    try:
        result = calibrate(dataset, options)
    except NumericalFailure as e:
        if e.last_result is not None:
            save_result(e.last_result, out)
        raise
    save_result(result, out)
    render_result(result)
    click.echo(f"Wrote {out}")
    if not result.converged:
        raise SystemExit(EXIT_NOT_CONVERGED)


@main.command("evaluate")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(path_type=Path), help="Dataset directory.")
@click.option("--result", "result_path", default=None, type=click.Path(dir_okay=False, path_type=Path), help="Result file (default: <dataset>/result.json).")
@click.option("--out", default=None, type=click.Path(dir_okay=False, path_type=Path), help="Metrics file (default: <dataset>/metrics.json).")
@common_options
def cmd_evaluate(dataset_dir: Path, result_path: Path | None, out: Path | None, cfg: dict[str, Any]) -> None:
    """Report AX=ZB errors, plus ground-truth errors when ground_truth.json exists."""
    dataset = load_dataset(dataset_dir)
    result = load_result(result_path or dataset_dir / RESULT_FILE)
    truth = load_ground_truth(dataset_dir)
    report = evaluate(result, dataset, truth, runtime=result.wall_time)
    out = out or dataset_dir / METRICS_FILE
    out.write_text(json.dumps(report_record(report), indent=2) + "\n")
    render_metrics(report)
    click.echo(f"Wrote {out}")


@main.command("compare")
@click.option("--dataset", "dataset_dir", default=None, type=click.Path(path_type=Path), help="Dataset directory.")
@click.option("--seed-sweep", "sweep", default=None, type=click.IntRange(min=1), help="Run K synthetic seeds instead of one dataset.")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Directory for comparison.txt and comparison.json.")
@common_options
@synth_options
@solver_options
def cmd_compare(
    dataset_dir: Path | None, sweep: int | None, out: Path, cfg: dict[str, Any], options, synth: SynthConfig
) -> None:
    """Compare ours, its ablations and the Tsai/Park baselines."""
    out.mkdir(parents=True, exist_ok=True)
    if sweep is not None:
        summary, _ = seed_sweep(synth, range(synth.seed, synth.seed + sweep), options)
        (out / COMPARISON_TEXT).write_text(table_text(sweep_table(summary)))
        (out / COMPARISON_JSON).write_text(json.dumps(sweep_record(summary), indent=2) + "\n")
        render_sweep(summary)
        return

    if dataset_dir is None:
        raise click.UsageError("--dataset is required unless --seed-sweep is given")
    dataset = load_dataset(dataset_dir)
    table = compare_methods(dataset, load_ground_truth(dataset_dir), options)
    (out / COMPARISON_TEXT).write_text(table_text(comparison_table(table)))
    (out / COMPARISON_JSON).write_text(json.dumps(comparison_record(table), indent=2) + "\n")
    render_comparison(table)
    if table.completed == 0:
        render_error("every method diverged")
        raise SystemExit(EXIT_NOT_CONVERGED)


if __name__ == "__main__":
    main()
