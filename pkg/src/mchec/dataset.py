"""Dataset model, on-disk layout and cross-detection matrices.

Layout under a dataset root::

    board.json              rows, cols, spacing_m
    robot_poses.csv         j,x,y,z,qx,qy,qz,qw
    cam<k>/intrinsics.json  fx, fy, cx, cy, dist[5], width, height
    cam<k>/corners_<j>.txt  L lines "u v" (absent when camera k missed pose j)
    ground_truth.json       optional, see mchec.metrics
"""

from __future__ import annotations

import csv
import json
import logging
import re
import shutil
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from mchec.board import BoardModel
from mchec.cammodel import CameraIntrinsics
from mchec.errors import FormatError, ValidationError
from mchec.geom import Pose

logger = logging.getLogger(__name__)

MIN_DETECTIONS_PER_CAMERA = 3
MIN_POSES = 3
ROBOT_POSES_HEADER = ["j", "x", "y", "z", "qx", "qy", "qz", "qw"]

_CAMERA_DIR = re.compile(r"^cam(\d+)$")
_CORNER_FILE = re.compile(r"^corners_(\d+)\.txt$")


def fmt(value: float) -> str:
    """Every float on disk is written with 12 significant digits."""
    return f"{float(value):.12g}"


@dataclass(frozen=True, eq=False)
class Detection:
    pose_index: int
    camera_index: int
    corners: np.ndarray  # (L, 2) pixels

    def __post_init__(self) -> None:
        corners = np.array(self.corners, dtype=float)
        if corners.ndim != 2 or corners.shape[1] != 2:
            raise ValidationError(f"detection ({self.pose_index}, {self.camera_index}) corners must be (L, 2)")
        if not np.all(np.isfinite(corners)):
            raise ValidationError(f"detection ({self.pose_index}, {self.camera_index}) has non-finite corners")
        corners.setflags(write=False)
        object.__setattr__(self, "corners", corners)


@dataclass(frozen=True)
class RobotPose:
    pose_index: int
    transform: Pose  # end-effector in base frame, T_E^W


@dataclass(frozen=True, eq=False)
class CrossDetectionMatrix:
    pose_index: int
    entries: np.ndarray  # (N, N) of 0/1

    def entry(self, k: int, t: int) -> int:
        return int(self.entries[k, t])

    def pairs(self) -> list[tuple[int, int]]:
        """Ordered pairs (k, t), k != t, with a co-detection."""
        ks, ts = np.nonzero(self.entries)
        return [(int(k), int(t)) for k, t in zip(ks, ts)]


@dataclass(frozen=True, eq=False)
class Dataset:
    cameras: tuple[CameraIntrinsics, ...]
    board: BoardModel
    robot_poses: tuple[RobotPose, ...]
    detections: Mapping[tuple[int, int], Detection] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "robot_poses", tuple(sorted(self.robot_poses, key=lambda r: r.pose_index)))
        object.__setattr__(self, "detections", dict(sorted(self.detections.items())))
        self.validate()

    @property
    def n_cameras(self) -> int:
        return len(self.cameras)

    @property
    def n_poses(self) -> int:
        return len(self.robot_poses)

    @property
    def corner_count(self) -> int:
        return self.board.corner_count

    def robot_pose(self, j: int) -> Pose:
        return self.robot_poses[j].transform

    def detection(self, j: int, k: int) -> Detection | None:
        return self.detections.get((j, k))

    def detections_for_camera(self, k: int) -> list[Detection]:
        return [d for (_, kk), d in self.detections.items() if kk == k]

    def cross_matrices(self) -> list[CrossDetectionMatrix]:
        return [cross_matrix(self, j) for j in range(self.n_poses)]

    def co_visible_pairs(self) -> list[tuple[int, int]]:
        """Sorted ordered pairs (k, t) that co-detect the board at least once."""
        pairs: set[tuple[int, int]] = set()
        for matrix in self.cross_matrices():
            pairs.update(matrix.pairs())
        return sorted(pairs)

    def validate(self) -> None:
        if self.n_cameras < 1:
            raise ValidationError("dataset has no cameras")
        if self.n_poses < MIN_POSES:
            raise ValidationError(f"dataset has {self.n_poses} robot poses; at least {MIN_POSES} are required")
        for expected, robot in enumerate(self.robot_poses):
            if robot.pose_index != expected:
                raise ValidationError(f"robot pose indices must be contiguous from 0 (missing {expected})")
        counts = [0] * self.n_cameras
        for (j, k), det in self.detections.items():
            if (det.pose_index, det.camera_index) != (j, k):
                raise ValidationError(f"detection keyed ({j}, {k}) reports ({det.pose_index}, {det.camera_index})")
            if not 0 <= j < self.n_poses:
                raise ValidationError(f"detection references unknown robot pose {j}")
            if not 0 <= k < self.n_cameras:
                raise ValidationError(f"detection references unknown camera {k}")
            if det.corners.shape[0] != self.corner_count:
                raise ValidationError(
                    f"detection ({j}, {k}) has {det.corners.shape[0]} corners, board has {self.corner_count}"
                )
            counts[k] += 1
        for k, count in enumerate(counts):
            if count < MIN_DETECTIONS_PER_CAMERA:
                raise ValidationError(
                    f"camera {k} has {count} detections; at least {MIN_DETECTIONS_PER_CAMERA} are required"
                )


def cross_matrix(d: Dataset, j: int) -> CrossDetectionMatrix:
    """X_j: entry (k, t) is 1 iff cameras k != t both detect the board at pose j."""
    if not 0 <= j < d.n_poses:
        raise IndexError(f"pose index {j} out of range [0, {d.n_poses})")
    seen = np.array([(j, k) in d.detections for k in range(d.n_cameras)], dtype=np.int8)
    entries = np.outer(seen, seen)
    np.fill_diagonal(entries, 0)
    return CrossDetectionMatrix(j, entries)


# --- reading -------------------------------------------------------------


def _read_json(path: Path) -> dict[str, Any]:
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise FormatError("required file is missing", path) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from e
    if not isinstance(data, dict):
        raise FormatError("expected a JSON object", path)
    return data


def _require(data: Mapping[str, Any], key: str, path: Path) -> Any:
    if key not in data:
        raise FormatError(f"missing key '{key}'", path)
    return data[key]


def _key_line(path: Path, key: str) -> int | None:
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if f'"{key}"' in line:
            return line_no
    return None


def _require_int(data: Mapping[str, Any], key: str, path: Path) -> int:
    value = _require(data, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"'{key}' must be an integer, got {value!r}", path, _key_line(path, key))
    return value


def _load_board(path: Path) -> BoardModel:
    data = _read_json(path)
    try:
        return BoardModel(
            rows=_require_int(data, "rows", path),
            cols=_require_int(data, "cols", path),
            spacing=float(_require(data, "spacing_m", path)),
        )
    except ValidationError as e:
        raise ValidationError(str(e), path) from e
    except (TypeError, ValueError) as e:
        raise FormatError(f"bad board value: {e}", path) from e


def _load_intrinsics(path: Path) -> CameraIntrinsics:
    data = _read_json(path)
    try:
        dist = [float(x) for x in _require(data, "dist", path)]
        if len(dist) != 5:
            raise FormatError(f"'dist' needs 5 coefficients, got {len(dist)}", path)
        return CameraIntrinsics(
            fx=float(_require(data, "fx", path)),
            fy=float(_require(data, "fy", path)),
            cx=float(_require(data, "cx", path)),
            cy=float(_require(data, "cy", path)),
            image_width=_require_int(data, "width", path),
            image_height=_require_int(data, "height", path),
            distortion=tuple(dist),
        )
    except ValidationError as e:
        raise ValidationError(str(e), path) from e
    except (TypeError, ValueError) as e:
        raise FormatError(f"bad intrinsics value: {e}", path) from e


def _load_robot_poses(path: Path) -> list[RobotPose]:
    poses: dict[int, RobotPose] = {}
    if not path.is_file():
        raise FormatError("required file is missing", path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ROBOT_POSES_HEADER:
            raise FormatError(f"header must be '{','.join(ROBOT_POSES_HEADER)}'", path, 1)
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(ROBOT_POSES_HEADER):
                raise FormatError(f"expected {len(ROBOT_POSES_HEADER)} fields, got {len(row)}", path, line_no)
            try:
                j = int(row[0])
                values = [float(cell) for cell in row[1:]]
            except ValueError as e:
                raise FormatError(f"not a number: {e}", path, line_no) from e
            if j in poses:
                raise ValidationError(f"duplicate robot pose {j}", path, line_no)
            try:
                poses[j] = RobotPose(j, Pose.from_vector(values))
            except ValidationError as e:
                raise ValidationError(str(e), path, line_no) from e
    return [poses[j] for j in sorted(poses)]


def _load_corners(path: Path, expected: int) -> np.ndarray:
    corners: list[tuple[float, float]] = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise FormatError(f"expected 'u v', got {len(fields)} fields", path, line_no)
            try:
                u, v = float(fields[0]), float(fields[1])
            except ValueError as e:
                raise FormatError(f"not a number: {e}", path, line_no) from e
            if not (np.isfinite(u) and np.isfinite(v)):
                raise FormatError("non-finite corner coordinate", path, line_no)
            corners.append((u, v))
    if len(corners) != expected:
        raise FormatError(f"expected {expected} corners, got {len(corners)}", path)
    return np.array(corners)


def _camera_dirs(root: Path) -> list[Path]:
    found: dict[int, Path] = {}
    for child in root.iterdir():
        match = _CAMERA_DIR.match(child.name)
        if match and child.is_dir():
            found[int(match.group(1))] = child
    if not found:
        raise FormatError("no cam<k> directories found", root)
    for expected in range(len(found)):
        if expected not in found:
            raise FormatError(f"camera directories must be contiguous from cam0 (missing cam{expected})", root)
    return [found[k] for k in range(len(found))]


def load_dataset(root_path: Path | str) -> Dataset:
    root = Path(root_path)
    if not root.is_dir():
        raise FormatError("dataset directory does not exist", root)
    board = _load_board(root / "board.json")
    robot_poses = _load_robot_poses(root / "robot_poses.csv")

    cameras: list[CameraIntrinsics] = []
    detections: dict[tuple[int, int], Detection] = {}
    for k, cam_dir in enumerate(_camera_dirs(root)):
        cameras.append(_load_intrinsics(cam_dir / "intrinsics.json"))
        for corner_file in sorted(cam_dir.iterdir()):
            match = _CORNER_FILE.match(corner_file.name)
            if not match:
                continue
            j = int(match.group(1))
            detections[(j, k)] = Detection(j, k, _load_corners(corner_file, board.corner_count))

    logger.debug(
        "loaded %s: %d cameras, %d poses, %d detections", root, len(cameras), len(robot_poses), len(detections)
    )
    try:
        return Dataset(tuple(cameras), board, tuple(robot_poses), detections)
    except ValidationError as e:
        if e.path is None:
            raise ValidationError(str(e), root) from e
        raise


# --- writing -------------------------------------------------------------


def pose_record(pose: Pose) -> list[float]:
    """7-number convention rounded to what is written on disk."""
    return [float(fmt(v)) for v in pose.to_vector()]


def save_dataset(d: Dataset, root_path: Path | str) -> None:
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    for child in root.iterdir():
        match = _CAMERA_DIR.match(child.name)
        if match and child.is_dir() and int(match.group(1)) >= d.n_cameras:
            logger.debug("removing stale camera directory %s", child)
            shutil.rmtree(child)

    board = {"rows": d.board.rows, "cols": d.board.cols, "spacing_m": float(fmt(d.board.spacing))}
    (root / "board.json").write_text(json.dumps(board, indent=2) + "\n")

    lines = [",".join(ROBOT_POSES_HEADER)]
    for robot in d.robot_poses:
        lines.append(",".join([str(robot.pose_index)] + [fmt(v) for v in robot.transform.to_vector()]))
    (root / "robot_poses.csv").write_text("\n".join(lines) + "\n")

    for k, intr in enumerate(d.cameras):
        cam_dir = root / f"cam{k}"
        cam_dir.mkdir(exist_ok=True)
        for stale in cam_dir.glob("corners_*.txt"):
            stale.unlink()
        record = {
            "fx": float(fmt(intr.fx)),
            "fy": float(fmt(intr.fy)),
            "cx": float(fmt(intr.cx)),
            "cy": float(fmt(intr.cy)),
            "dist": [float(fmt(x)) for x in intr.distortion],
            "width": intr.image_width,
            "height": intr.image_height,
        }
        (cam_dir / "intrinsics.json").write_text(json.dumps(record, indent=2) + "\n")

    for (j, k), det in d.detections.items():
        text = "\n".join(f"{fmt(u)} {fmt(v)}" for u, v in det.corners)
        (root / f"cam{k}" / f"corners_{j}.txt").write_text(text + "\n")


def pose_from_record(values: Sequence[float], path: Path | None = None) -> Pose:
    try:
        return Pose.from_vector(values)
    except ValidationError as e:
        raise ValidationError(str(e), path) from e
