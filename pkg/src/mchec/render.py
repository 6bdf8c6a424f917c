"""Rich-based rendering for visibility statistics, cost reports, metrics and comparisons."""

from __future__ import annotations

import io
from collections.abc import Sequence

from rich.console import Console
from rich.markup import escape
from rich.table import Table

from mchec.metrics import ComparisonTable, MetricsReport, SweepSummary
from mchec.solver import CalibrationResult, CostReport

console = Console()

ERROR_STYLE = "bold red"
MISSING = "-"


def _num(value: float | None, digits: int = 4) -> str:
    return MISSING if value is None else f"{value:.{digits}f}"


def render_visibility(counts: Sequence[int], pairs: int, n_poses: int) -> None:
    """Per-camera detection counts of a generated or loaded dataset."""
    table = Table(title="Board detections", border_style="dim")
    table.add_column("Camera", style="bold")
    table.add_column("Detections", justify="right")
    table.add_column("Share", justify="right", style="dim")
    for k, count in enumerate(counts):
        table.add_row(f"cam{k}", str(count), f"{count / n_poses:.0%}")
    console.print(table)
    console.print(f"[dim]{n_poses} robot poses, {pairs} co-visible ordered camera pairs[/dim]")


def render_cost(report: CostReport, title: str = "Cost") -> None:
    table = Table(title=title, border_style="dim")
    table.add_column("Term", style="bold")
    table.add_column("Robust [px^2]", justify="right")
    table.add_column("Squared [px^2]", justify="right", style="dim")
    table.add_row("c_rpj", f"{report.c_rpj:.6e}", f"{report.raw_rpj:.6e}")
    table.add_row("c_cross", f"{report.c_cross:.6e}", f"{report.raw_cross:.6e}")
    table.add_row("total", f"{report.c_total:.6e}", f"{report.raw_rpj + report.raw_cross:.6e}")
    console.print(table)


def render_result(result: CalibrationResult) -> None:
    status = "[green]converged[/green]" if result.converged else "[yellow]not converged[/yellow]"
    console.print(
        f"{status} ({result.termination_reason}) after {result.iterations} iterations "
        f"in {result.wall_time:.2f} s, cost {result.initial_cost:.6e} -> {result.final_cost:.6e}"
    )
    if result.cost_report is not None:
        render_cost(result.cost_report)

    table = Table(title="Reprojection RMS", border_style="dim")
    table.add_column("Camera", style="bold")
    table.add_column("RMS [px]", justify="right")
    for k, rms in enumerate(result.per_camera_rms_reprojection):
        table.add_row(f"cam{k}", f"{rms:.4f}")
    console.print(table)


def render_metrics(report: MetricsReport) -> None:
    table = Table(title="Hand-eye errors", border_style="dim")
    table.add_column("Camera", style="bold")
    if report.has_ground_truth:
        table.add_column("e_t GT [mm]", justify="right")
        table.add_column("e_R GT [deg]", justify="right")
    table.add_column("e_t AX=ZB [mm]", justify="right")
    table.add_column("e_R AX=ZB [deg]", justify="right")

    for k in range(len(report.per_camera_t_axzb)):
        row = [f"cam{k}"]
        if report.has_ground_truth:
            row += [_num(report.per_camera_t_gt[k]), _num(report.per_camera_theta_gt[k])]
        row += [_num(report.per_camera_t_axzb[k]), _num(report.per_camera_theta_axzb[k])]
        table.add_row(*row)

    mean = ["mean"]
    if report.has_ground_truth:
        mean += [_num(report.e_t_gt), _num(report.e_theta_gt)]
    mean += [_num(report.e_t_axzb), _num(report.e_theta_axzb)]
    table.add_row(*mean, style="bold")
    console.print(table)


def comparison_table(table: ComparisonTable) -> Table:
    out = Table(title="Method comparison (average over cameras)", border_style="dim")
    out.add_column("Method", style="bold")
    out.add_column("Status")
    if table.has_ground_truth:
        out.add_column("e_t GT [mm]", justify="right")
        out.add_column("e_R GT [deg]", justify="right")
    out.add_column("e_t AX=ZB [mm]", justify="right")
    out.add_column("e_R AX=ZB [deg]", justify="right")
    out.add_column("Time [s]", justify="right")

    for row in table.rows:
        status = "ok" if row.ok else f"[{ERROR_STYLE}]{row.status}[/{ERROR_STYLE}]"
        report = row.report
        cells = [row.method, status]
        if table.has_ground_truth:
            cells += [_num(report and report.e_t_gt), _num(report and report.e_theta_gt)]
        cells += [_num(report and report.e_t_axzb), _num(report and report.e_theta_axzb), f"{row.runtime:.3f}"]
        out.add_row(*cells)
    return out


def render_comparison(table: ComparisonTable) -> None:
    console.print(comparison_table(table))


def sweep_table(summary: SweepSummary) -> Table:
    out = Table(title=f"Median over {len(summary.seeds)} seeds", border_style="dim")
    out.add_column("Method", style="bold")
    out.add_column("Converged", justify="right")
    out.add_column("e_t GT [mm]", justify="right")
    out.add_column("e_R GT [deg]", justify="right")
    out.add_column("e_t AX=ZB [mm]", justify="right")
    out.add_column("e_R AX=ZB [deg]", justify="right")
    out.add_column("Time [s]", justify="right")
    for method, medians in summary.medians.items():
        out.add_row(
            method,
            f"{summary.convergence_rate[method]:.0%}",
            *(_num(medians[c]) for c in ("e_t_gt", "e_theta_gt", "e_t_axzb", "e_theta_axzb")),
            _num(medians["runtime"], 3),
        )
    return out


def render_sweep(summary: SweepSummary) -> None:
    console.print(sweep_table(summary))
    console.print(f"[dim]median Spearman(e_t, e_t GT) over ours/tsai/park: {summary.median_spearman:.3f}[/dim]")


def render_error(msg: str) -> None:
    """Render an error message in red."""
    console.print(f"[{ERROR_STYLE}]Error:[/{ERROR_STYLE}] {escape(msg)}")


def table_text(table: Table, width: int = 120) -> str:
    """Plain aligned text of a rich table, for report files."""
    buffer = Console(file=io.StringIO(), width=width, color_system=None, record=True)
    buffer.print(table)
    return buffer.export_text()
