"""Result file persistence (JSON)."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from mchec.dataset import pose_from_record
from mchec.errors import ConfigError, FormatError, ValidationError
from mchec.solver import CalibrationResult, CostReport, IterationRecord, SolverOptions

RESULT_FILE = "result.json"


def save_result(result: CalibrationResult, path: Path | str) -> Path:
    """Write ``result`` as JSON. Keys are sorted so identical results give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.as_record(), indent=2, sort_keys=True) + "\n")
    return path


def load_result(path: Path | str) -> CalibrationResult:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as e:
        raise FormatError("result file is missing", path) from e
    try:
        record = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from e
    if not isinstance(record, dict):
        raise FormatError("expected a JSON object", path)
    try:
        return _from_record(record, path)
    except (KeyError, TypeError, ValueError, ConfigError) as e:
        raise FormatError(f"malformed result: {e!r}", path) from e


def _float(value: Any) -> float:
    return math.nan if value is None else float(value)


def _cost(record: dict[str, Any] | None) -> CostReport | None:
    if record is None:
        return None
    return CostReport(
        c_rpj=_float(record["c_rpj"]),
        c_cross=_float(record["c_cross"]),
        c_total=_float(record["c_total"]),
        residual_count=int(record["residual_count"]),
        raw_rpj=_float(record.get("raw_rpj", 0.0)),
        raw_cross=_float(record.get("raw_cross", 0.0)),
    )


def _from_record(record: dict[str, Any], path: Path) -> CalibrationResult:
    def pose(values: Any):
        try:
            return pose_from_record(values, path)
        except ValidationError as e:
            raise FormatError(str(e), path) from e

    hand_eye = tuple(pose(v) for v in record["hand_eye"])
    if not hand_eye:
        raise FormatError("result has no hand-eye transforms", path)
    cam_to_cam = {(int(e["k"]), int(e["t"])): pose(e["pose"]) for e in record.get("cam_to_cam", [])}
    gaps = {
        (int(e["k"]), int(e["t"])): (_float(e["translation_m"]), _float(e["rotation_deg"]))
        for e in record.get("consistency_gaps", [])
    }
    log = tuple(
        IterationRecord(
            iteration=int(e["iteration"]),
            cost=_float(e["cost"]),
            damping=_float(e["lambda"]),
            step_norm=_float(e["step_norm"]),
            accepted=bool(e["accepted"]),
        )
        for e in record.get("iteration_log", [])
    )
    return CalibrationResult(
        hand_eye=hand_eye,
        board_to_ee=pose(record["board_to_ee"]),
        cam_to_cam=cam_to_cam,
        final_cost=_float(record["final_cost"]),
        initial_cost=_float(record["initial_cost"]),
        iterations=int(record["iterations"]),
        converged=bool(record["converged"]),
        termination_reason=str(record["termination_reason"]),
        wall_time=_float(record.get("wall_time")),
        per_camera_rms_reprojection=tuple(_float(v) for v in record.get("per_camera_rms_reprojection", [])),
        options=SolverOptions(**record.get("options", {})),
        cost_report=_cost(record.get("cost_report")),
        initial_cost_report=_cost(record.get("initial_cost_report")),
        iteration_log=log,
        consistency_gaps=gaps,
        board_to_ee_per_camera=tuple(pose(v) for v in record.get("board_to_ee_per_camera", [])),
    )
