"""Ground-truth and AX=ZB error metrics, method comparison.

AX=ZB frame conventions: A_j is the camera-in-board pose (inverse of the
planar pose), X = T_W^Ck, Z = (T_B^E)^-1 and B_j = (T_E^W)^-1, so both sides
equal T_W^B and the residual vanishes on exact data.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from mchec.dataset import Dataset, RobotPose, fmt, pose_from_record, pose_record
from mchec.errors import DimensionMismatch, FormatError, MissingBoardPose, ValidationError
from mchec.geom import Pose, compose, invert, relative_angle_deg, translation_distance
from mchec.initest import BoardPoseEstimate, estimate_board_poses
from mchec.methods.builtin import default_registry
from mchec.methods.registry import Estimate, MethodRegistry, MethodRun
from mchec.solver import SolverOptions

logger = logging.getLogger(__name__)

GROUND_TRUTH_FILE = "ground_truth.json"
MM_PER_M = 1000.0
CONSISTENCY_METHODS = ("ours", "tsai", "park")


@dataclass(frozen=True)
class GroundTruth:
    hand_eye: tuple[Pose, ...]
    board_to_ee: Pose

    def save(self, path: Path | str) -> None:
        record = {
            "hand_eye": [pose_record(p) for p in self.hand_eye],
            "board_to_ee": pose_record(self.board_to_ee),
        }
        Path(path).write_text(json.dumps(record, indent=2) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> GroundTruth:
        path = Path(path)
        try:
            record = json.loads(path.read_text())
            return cls(
                hand_eye=tuple(pose_from_record(v, path) for v in record["hand_eye"]),
                board_to_ee=pose_from_record(record["board_to_ee"], path),
            )
        except FileNotFoundError as e:
            raise FormatError("ground truth file is missing", path) from e
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from e
        except (KeyError, TypeError, ValueError, ValidationError) as e:
            raise FormatError(f"malformed ground truth: {e!r}", path) from e


def load_ground_truth(root: Path | str) -> GroundTruth | None:
    """ground_truth.json of a dataset directory, or None when absent."""
    path = Path(root) / GROUND_TRUTH_FILE
    return GroundTruth.load(path) if path.is_file() else None


@dataclass(frozen=True)
class MetricsReport:
    """Errors in millimeters and degrees; GT fields are None without ground truth."""

    e_t_axzb: float
    e_theta_axzb: float
    per_camera_t_axzb: tuple[float, ...]
    per_camera_theta_axzb: tuple[float, ...]
    e_t_gt: float | None = None
    e_theta_gt: float | None = None
    per_camera_t_gt: tuple[float, ...] = ()
    per_camera_theta_gt: tuple[float, ...] = ()
    runtime: float = 0.0

    @property
    def has_ground_truth(self) -> bool:
        return self.e_t_gt is not None


# --- ground truth family ----------------------------------------------------


def gt_errors_per_camera(estimate: Estimate, truth: GroundTruth) -> list[tuple[float, float]]:
    if len(estimate.hand_eye) != len(truth.hand_eye):
        raise DimensionMismatch(f"estimate has {len(estimate.hand_eye)} cameras, ground truth {len(truth.hand_eye)}")
    return [
        (MM_PER_M * translation_distance(est, gt), relative_angle_deg(gt.rotation, est.rotation))
        for est, gt in zip(estimate.hand_eye, truth.hand_eye)
    ]


def gt_errors(estimate: Estimate, truth: GroundTruth) -> tuple[float, float]:
    """Mean hand-eye translation error (mm) and rotation error (deg) over cameras."""
    per_camera = gt_errors_per_camera(estimate, truth)
    return float(np.mean([t for t, _ in per_camera])), float(np.mean([r for _, r in per_camera]))


# --- AX = ZB family ---------------------------------------------------------


def _axzb_chain_errors(X: Pose, Z_inv: Pose, A: Pose, B: Pose) -> tuple[float, float]:
    AX = compose(A, X)
    ZB = compose(Z_inv, B)
    return MM_PER_M * translation_distance(AX, ZB), relative_angle_deg(AX.rotation, ZB.rotation)


def axzb_errors_per_camera(
    estimate: Estimate,
    board_poses: Sequence[BoardPoseEstimate],
    robot_poses: Sequence[RobotPose],
) -> list[list[tuple[float, float]]]:
    """Per camera, the (mm, deg) error of every (camera, pose) chain."""
    robot = {r.pose_index: r.transform for r in robot_poses}
    n = len(estimate.hand_eye)
    Z_inv = invert(estimate.board_to_ee)
    chains: list[list[tuple[float, float]]] = [[] for _ in range(n)]
    for bp in board_poses:
        if not 0 <= bp.camera_index < n:
            raise DimensionMismatch(f"board pose references camera {bp.camera_index}, estimate has {n}")
        if bp.pose_index not in robot:
            raise MissingBoardPose(f"no robot pose {bp.pose_index} for camera {bp.camera_index}")
        A = invert(bp.board_in_camera)
        B = invert(robot[bp.pose_index])
        chains[bp.camera_index].append(_axzb_chain_errors(estimate.hand_eye[bp.camera_index], Z_inv, A, B))
    for k, errors in enumerate(chains):
        if not errors:
            raise MissingBoardPose(f"camera {k} has no board pose to evaluate")
    return chains


def axzb_errors(
    estimate: Estimate,
    board_poses: Sequence[BoardPoseEstimate],
    robot_poses: Sequence[RobotPose],
) -> tuple[float, float]:
    """Mean AX=ZB translation (mm) and rotation (deg) error pooled over all chains."""
    pooled = [e for errors in axzb_errors_per_camera(estimate, board_poses, robot_poses) for e in errors]
    return float(np.mean([t for t, _ in pooled])), float(np.mean([r for _, r in pooled]))


def dataset_board_poses(dataset: Dataset) -> list[BoardPoseEstimate]:
    return [bp for k in range(dataset.n_cameras) for bp in estimate_board_poses(dataset, k)]


def evaluate(
    estimate: Estimate,
    dataset: Dataset,
    truth: GroundTruth | None = None,
    runtime: float = 0.0,
    board_poses: Sequence[BoardPoseEstimate] | None = None,
) -> MetricsReport:
    if board_poses is None:
        board_poses = dataset_board_poses(dataset)
    chains = axzb_errors_per_camera(estimate, board_poses, dataset.robot_poses)
    pooled = [e for errors in chains for e in errors]
    report = MetricsReport(
        e_t_axzb=float(np.mean([t for t, _ in pooled])),
        e_theta_axzb=float(np.mean([r for _, r in pooled])),
        per_camera_t_axzb=tuple(float(np.mean([t for t, _ in c])) for c in chains),
        per_camera_theta_axzb=tuple(float(np.mean([r for _, r in c])) for c in chains),
        runtime=runtime,
    )
    if truth is None:
        return report
    per_camera = gt_errors_per_camera(estimate, truth)
    return replace(
        report,
        e_t_gt=float(np.mean([t for t, _ in per_camera])),
        e_theta_gt=float(np.mean([r for _, r in per_camera])),
        per_camera_t_gt=tuple(t for t, _ in per_camera),
        per_camera_theta_gt=tuple(r for _, r in per_camera),
    )


# --- comparison -------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    status: str
    report: MetricsReport | None
    runtime: float
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok" and self.report is not None


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    has_ground_truth: bool = False

    def row(self, method: str) -> ComparisonRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    @property
    def completed(self) -> int:
        return sum(r.ok for r in self.rows)


def _row(run: MethodRun, dataset: Dataset, truth: GroundTruth | None, board_poses) -> ComparisonRow:
    if run.estimate is None or not run.ok:
        return ComparisonRow(run.name, run.status, None, run.runtime, run.message)
    report = evaluate(run.estimate, dataset, truth, run.runtime, board_poses)
    return ComparisonRow(run.name, run.status, report, run.runtime)


def compare_methods(
    dataset: Dataset,
    truth: GroundTruth | None = None,
    options: SolverOptions | None = None,
    registry: MethodRegistry | None = None,
    methods: Iterable[str] | None = None,
) -> ComparisonTable:
    """Run ``methods`` (default: every registered one) on ``dataset``; a failing method becomes a diverged row."""
    options = options or SolverOptions()
    registry = registry or default_registry()
    board_poses = dataset_board_poses(dataset)
    rows = []
    for name in registry.names() if methods is None else methods:
        run = registry.execute(name, dataset, options)
        logger.info("%s: %s in %.3f s", name, run.status, run.runtime)
        rows.append(_row(run, dataset, truth, board_poses))
    return ComparisonTable(tuple(rows), truth is not None)


def spearman_consistency(table: ComparisonTable, methods: Sequence[str] = CONSISTENCY_METHODS) -> float:
    """Spearman rank correlation of e_t (AX=ZB) against e_t_gt over completed rows; NaN when undefined."""
    pairs = [
        (r.report.e_t_axzb, r.report.e_t_gt)
        for r in table.rows
        if r.method in methods and r.ok and r.report.e_t_gt is not None
    ]
    if len(pairs) < 2:
        return math.nan
    x, y = zip(*pairs)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return math.nan
    rho, _ = stats.spearmanr(x, y)
    return float(rho)


# --- records ----------------------------------------------------------------


def _number(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(fmt(value))


def report_record(report: MetricsReport) -> dict[str, Any]:
    record: dict[str, Any] = {
        "e_t_axzb_mm": _number(report.e_t_axzb),
        "e_theta_axzb_deg": _number(report.e_theta_axzb),
        "per_camera_t_axzb_mm": [_number(v) for v in report.per_camera_t_axzb],
        "per_camera_theta_axzb_deg": [_number(v) for v in report.per_camera_theta_axzb],
        "runtime_s": _number(report.runtime),
    }
    if report.has_ground_truth:
        record.update(
            {
                "e_t_gt_mm": _number(report.e_t_gt),
                "e_theta_gt_deg": _number(report.e_theta_gt),
                "per_camera_t_gt_mm": [_number(v) for v in report.per_camera_t_gt],
                "per_camera_theta_gt_deg": [_number(v) for v in report.per_camera_theta_gt],
            }
        )
    return record


def comparison_record(table: ComparisonTable) -> list[dict[str, Any]]:
    """One record per method, in table order."""
    records = []
    for row in table.rows:
        record: dict[str, Any] = {"method": row.method, "status": row.status, "runtime_s": _number(row.runtime)}
        if row.report is not None:
            record.update(report_record(row.report))
        if row.message:
            record["message"] = row.message
        records.append(record)
    return records


@dataclass(frozen=True)
class SweepSummary:
    """Per-method medians over a seed sweep."""

    seeds: tuple[int, ...]
    medians: dict[str, dict[str, float]] = field(default_factory=dict)
    convergence_rate: dict[str, float] = field(default_factory=dict)
    median_spearman: float = math.nan


ERROR_COLUMNS = ("e_t_gt", "e_theta_gt", "e_t_axzb", "e_theta_axzb", "runtime")


def _median(reports: Sequence[MetricsReport], column: str) -> float:
    values = [getattr(r, column) for r in reports if getattr(r, column) is not None]
    return float(np.median(values)) if values else math.nan


def summarize_sweep(seeds: Sequence[int], tables: Sequence[ComparisonTable]) -> SweepSummary:
    methods = [r.method for r in tables[0].rows] if tables else []
    medians: dict[str, dict[str, float]] = {}
    rates: dict[str, float] = {}
    for method in methods:
        rows = [t.row(method) for t in tables]
        done = [r.report for r in rows if r.ok]
        rates[method] = len(done) / len(rows)
        medians[method] = {column: _median(done, column) for column in ERROR_COLUMNS}
    correlations = [c for c in (spearman_consistency(t) for t in tables) if not math.isnan(c)]
    return SweepSummary(
        seeds=tuple(seeds),
        medians=medians,
        convergence_rate=rates,
        median_spearman=float(np.median(correlations)) if correlations else math.nan,
    )


def sweep_record(summary: SweepSummary) -> dict[str, Any]:
    return {
        "seeds": list(summary.seeds),
        "median_spearman": _number(summary.median_spearman),
        "methods": [
            {
                "method": method,
                "convergence_rate": _number(summary.convergence_rate[method]),
                **{f"median_{column}": _number(value) for column, value in columns.items()},
            }
            for method, columns in summary.medians.items()
        ],
    }
