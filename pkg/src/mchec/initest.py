"""Initial estimates and the closed-form Tsai / Park hand-eye baselines.

Camera k is static in the workcell, so every board observation closes the
chain  T_B^Ck,j = X_k . E_j . Z  with X_k = T_W^Ck, E_j = T_E^W and Z = T_B^E.
Between two poses a, b this gives  A X = X B  with
A = T_B^C,a . (T_B^C,b)^-1  and  B = E_a . E_b^-1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from mchec.board import BoardModel
from mchec.cammodel import CameraIntrinsics, undistort_normalized
from mchec.dataset import Dataset, RobotPose
from mchec.errors import DegenerateConfiguration, DimensionMismatch, InsufficientMotion
from mchec.geom import (
    Pose,
    average_poses,
    compose,
    invert,
    relative_angle_deg,
    rotation_to_axis_angle,
    skew,
)

logger = logging.getLogger(__name__)

MIN_MOTION_DEG = 1.0
_RANK_TOL = 1e-9


@dataclass(frozen=True)
class BoardPoseEstimate:
    pose_index: int
    camera_index: int
    board_in_camera: Pose  # frame B expressed in camera C_k


@dataclass(frozen=True)
class InitialGuess:
    hand_eye: tuple[Pose, ...]
    board_to_ee: Pose
    cam_to_cam: dict[tuple[int, int], Pose]
    board_to_ee_per_camera: tuple[Pose, ...] = field(default=())


@dataclass(frozen=True)
class BaselineResult:
    """Per-camera closed-form solution; board_to_ee is the average of the per-camera Z."""

    hand_eye: tuple[Pose, ...]
    board_to_ee: Pose
    board_to_ee_per_camera: tuple[Pose, ...]


# --- planar pose -----------------------------------------------------------


def _hartley(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to 0 and the mean distance to sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(points - centroid, axis=1))
    if mean_dist <= 0.0:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.column_stack([points, np.ones(len(points))])


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT homography mapping src (L, 2) to dst (L, 2)."""
    T_src, T_dst = _hartley(src), _hartley(dst)
    s = (_homogeneous(src) @ T_src.T)[:, :2]
    d = (_homogeneous(dst) @ T_dst.T)[:, :2]

    n = len(s)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = -s
    A[0::2, 2] = -1.0
    A[0::2, 6:8] = d[:, :1] * s
    A[0::2, 8] = d[:, 0]
    A[1::2, 3:5] = -s
    A[1::2, 5] = -1.0
    A[1::2, 6:8] = d[:, 1:] * s
    A[1::2, 8] = d[:, 1]

    _, sv, Vt = np.linalg.svd(A)
    # a unique homography needs a one-dimensional null space
    if sv[7] < _RANK_TOL * sv[0]:
        raise DegenerateConfiguration("homography system is rank deficient (collinear corners?)")
    H = np.linalg.inv(T_dst) @ Vt[-1].reshape(3, 3) @ T_src
    return H / H[2, 2] if abs(H[2, 2]) > 1e-15 else H


def planar_pose(corners: np.ndarray, board: BoardModel, intr: CameraIntrinsics) -> Pose:
    """Board-in-camera pose from one detection via a planar homography."""
    corners = np.asarray(corners, dtype=float)
    if corners.ndim != 2 or len(corners) < 4:
        raise DegenerateConfiguration(f"need at least 4 corners for a homography, got {len(corners)}")
    if len(corners) != board.corner_count:
        raise DimensionMismatch(f"{len(corners)} corners for a board with {board.corner_count}")

    normalized = undistort_normalized(corners, intr, iterations=10)
    H = estimate_homography(board.corner_points()[:, :2], normalized)

    h1, h2, h3 = H[:, 0], H[:, 1], H[:, 2]
    scale = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    center = board.center()
    if scale * (H[2, 0] * center[0] + H[2, 1] * center[1] + H[2, 2]) < 0.0:
        scale = -scale
    r1, r2, t = scale * h1, scale * h2, scale * h3
    U, _, Vt = np.linalg.svd(np.column_stack([r1, r2, np.cross(r1, r2)]))
    R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
    return Pose(R, t)


def estimate_board_poses(d: Dataset, k: int) -> list[BoardPoseEstimate]:
    intr = d.cameras[k]
    return [
        BoardPoseEstimate(det.pose_index, k, planar_pose(det.corners, d.board, intr))
        for det in d.detections_for_camera(k)
    ]


# --- AX = XB ---------------------------------------------------------------


@dataclass(frozen=True)
class _Motion:
    A: Pose
    B: Pose


def _relative_motions(board_poses: Sequence[BoardPoseEstimate], robot_poses: Sequence[RobotPose]) -> list[_Motion]:
    if len(board_poses) < 3:
        raise InsufficientMotion(f"need at least 3 detections, got {len(board_poses)}")
    robot = {r.pose_index: r.transform for r in robot_poses}
    ordered = sorted(board_poses, key=lambda e: e.pose_index)
    motions = []
    for a, b in zip(ordered, ordered[1:]):
        B = compose(robot[a.pose_index], invert(robot[b.pose_index]))
        if relative_angle_deg(np.eye(3), B.rotation) < MIN_MOTION_DEG:
            continue
        A = compose(a.board_in_camera, invert(b.board_in_camera))
        motions.append(_Motion(A, B))
    if not motions:
        raise InsufficientMotion(f"every relative robot rotation is below {MIN_MOTION_DEG} deg")
    return motions


def _park_rotation(motions: Sequence[_Motion]) -> np.ndarray:
    """Least squares on so(3): alpha_i = R_X beta_i, solved as (M^T M)^-1/2 M^T."""
    M = np.zeros((3, 3))
    for m in motions:
        M += np.outer(rotation_to_axis_angle(m.B.rotation), rotation_to_axis_angle(m.A.rotation))
    U, s, Vt = np.linalg.svd(M)
    if s[1] < _RANK_TOL * max(s[0], 1e-300):
        raise InsufficientMotion("relative rotation axes are all parallel")
    V = Vt.T
    return V @ np.diag([1.0, 1.0, np.linalg.det(V @ U.T)]) @ U.T


def _tsai_rotation(motions: Sequence[_Motion]) -> np.ndarray:
    """Tsai-Lenz: skew(Pa + Pb) g = Pb - Pa with P = 2 sin(theta/2) n and g = tan(theta_x/2) n_x."""
    rows, rhs = [], []
    for m in motions:
        pa, pb = _modified_rodrigues(m.A.rotation), _modified_rodrigues(m.B.rotation)
        rows.append(skew(pa + pb))
        rhs.append(pb - pa)
    system = np.vstack(rows)
    s = np.linalg.svd(system, compute_uv=False)
    if s[2] < _RANK_TOL * max(s[0], 1e-300):
        raise InsufficientMotion("relative rotation axes are all parallel")
    g, *_ = np.linalg.lstsq(system, np.concatenate(rhs), rcond=None)
    return Rotation.from_quat(np.append(g, 1.0)).as_matrix()


def _modified_rodrigues(R: np.ndarray) -> np.ndarray:
    v = rotation_to_axis_angle(R)
    theta = np.linalg.norm(v)
    if theta < 1e-15:
        return np.zeros(3)
    return 2.0 * math.sin(theta / 2.0) * v / theta


def _translation(motions: Sequence[_Motion], R_X: np.ndarray) -> np.ndarray:
    """(R_A - I) t_X = R_X t_B - t_A, stacked over motions."""
    C = np.vstack([m.A.rotation - np.eye(3) for m in motions])
    d = np.concatenate([R_X @ m.B.translation - m.A.translation for m in motions])
    t, *_ = np.linalg.lstsq(C, d, rcond=None)
    return t


def _recover_board_to_ee(
    X: Pose, board_poses: Sequence[BoardPoseEstimate], robot_poses: Sequence[RobotPose]
) -> Pose:
    """Z_j = E_j^-1 X^-1 A_j per pose, then averaged."""
    robot = {r.pose_index: r.transform for r in robot_poses}
    X_inv = invert(X)
    return average_poses(
        [compose(invert(robot[e.pose_index]), compose(X_inv, e.board_in_camera)) for e in board_poses]
    )


def _closed_form(
    rotation_solver: Callable[[Sequence[_Motion]], np.ndarray],
    board_poses: Sequence[BoardPoseEstimate],
    robot_poses: Sequence[RobotPose],
) -> tuple[Pose, Pose]:
    motions = _relative_motions(board_poses, robot_poses)
    R_X = rotation_solver(motions)
    X = Pose(R_X, _translation(motions, R_X))
    return X, _recover_board_to_ee(X, board_poses, robot_poses)


def solve_park(
    board_poses: Sequence[BoardPoseEstimate], robot_poses: Sequence[RobotPose]
) -> tuple[Pose, Pose]:
    """Park's Lie-algebra closed form. Returns (hand_eye T_W^C, board_to_ee T_B^E)."""
    return _closed_form(_park_rotation, board_poses, robot_poses)


def solve_tsai(
    board_poses: Sequence[BoardPoseEstimate], robot_poses: Sequence[RobotPose]
) -> tuple[Pose, Pose]:
    """Tsai-Lenz two-step angle-axis closed form. Returns (hand_eye, board_to_ee)."""
    return _closed_form(_tsai_rotation, board_poses, robot_poses)


BASELINES: dict[str, Callable[[Sequence[BoardPoseEstimate], Sequence[RobotPose]], tuple[Pose, Pose]]] = {
    "park": solve_park,
    "tsai": solve_tsai,
}


def solve_baseline(d: Dataset, method: str = "park") -> BaselineResult:
    """Run a closed-form baseline independently for every camera."""
    solver = BASELINES[method]
    hand_eye, per_camera_z = [], []
    for k in range(d.n_cameras):
        try:
            X, Z = solver(estimate_board_poses(d, k), d.robot_poses)
        except InsufficientMotion as e:
            raise InsufficientMotion(str(e), camera=k) from e
        logger.debug("%s camera %d: hand_eye=%r", method, k, X)
        hand_eye.append(X)
        per_camera_z.append(Z)
    return BaselineResult(tuple(hand_eye), average_poses(per_camera_z), tuple(per_camera_z))


def _guess(d: Dataset, hand_eye: Sequence[Pose], board_to_ee: Pose, per_camera_z: Sequence[Pose]) -> InitialGuess:
    cam_to_cam = {(k, t): compose(hand_eye[k], invert(hand_eye[t])) for k, t in d.co_visible_pairs()}
    return InitialGuess(
        hand_eye=tuple(hand_eye),
        board_to_ee=board_to_ee,
        cam_to_cam=cam_to_cam,
        board_to_ee_per_camera=tuple(per_camera_z),
    )


def build_initial_guess(d: Dataset) -> InitialGuess:
    """Park per camera, shared Z by averaging, cam-to-cam by chaining hand-eyes."""
    baseline = solve_baseline(d, "park")
    return _guess(d, baseline.hand_eye, baseline.board_to_ee, baseline.board_to_ee_per_camera)


def hand_eye_through(board_poses: Sequence[BoardPoseEstimate], robot_poses: Sequence[RobotPose], Z: Pose) -> Pose:
    """X_k = A_j . (E_j . Z)^-1 for every detection of camera k, averaged."""
    robot = {r.pose_index: r.transform for r in robot_poses}
    return average_poses(
        [compose(e.board_in_camera, invert(compose(robot[e.pose_index], Z))) for e in board_poses]
    )


def initial_candidates(d: Dataset) -> dict[str, InitialGuess]:
    """Starting points for the joint solve, keyed by how they were built.

    ``park`` and ``tsai`` take the per-camera closed forms as they are and exist
    only when every camera has enough motion. ``park-chained`` and
    ``tsai-chained`` keep the averaged Z of the cameras that could be solved and
    re-derive every hand-eye from the planar board poses through that Z, so a
    camera with only a few detections still gets a start.
    """
    board_poses = [estimate_board_poses(d, k) for k in range(d.n_cameras)]
    candidates: dict[str, InitialGuess] = {}
    first_error: InsufficientMotion | None = None
    for method, solver in BASELINES.items():
        solved: dict[int, tuple[Pose, Pose]] = {}
        for k in range(d.n_cameras):
            try:
                solved[k] = solver(board_poses[k], d.robot_poses)
            except InsufficientMotion as e:
                logger.debug("%s start skips camera %d: %s", method, k, e)
                if first_error is None:
                    first_error = InsufficientMotion(str(e), camera=k)
        if not solved:
            continue
        Z = average_poses([z for _, z in solved.values()])
        if len(solved) == d.n_cameras:
            hand_eye, per_camera_z = zip(*(solved[k] for k in range(d.n_cameras)))
            candidates[method] = _guess(d, hand_eye, Z, per_camera_z)
        chained = [hand_eye_through(board_poses[k], d.robot_poses, Z) for k in range(d.n_cameras)]
        candidates[f"{method}-chained"] = _guess(d, chained, Z, [Z] * d.n_cameras)
    if not candidates:
        assert first_error is not None
        raise first_error
    return candidates
