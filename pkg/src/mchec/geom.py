"""Rigid-body geometry: rotations, SE(3) poses and the axis-angle parameterization."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from mchec.errors import ValidationError

ORTHONORMAL_TOL = 1e-9
QUATERNION_NORM_TOL = 1e-3
_SMALL_ANGLE = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def is_rotation_matrix(R: np.ndarray, tol: float = ORTHONORMAL_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if np.linalg.norm(R.T @ R - np.eye(3)) >= tol:
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def axis_angle_to_rotation(v: np.ndarray) -> np.ndarray:
    """Rodrigues map exp([v]x)."""
    return Rotation.from_rotvec(np.array(v, dtype=float)).as_matrix()


def rotation_to_axis_angle(R: np.ndarray) -> np.ndarray:
    """Inverse Rodrigues map with norm in [0, pi].

    scipy extracts the quaternion from the largest diagonal element first,
    so rotations close to pi do not lose precision.
    """
    return Rotation.from_matrix(np.array(R, dtype=float)).as_rotvec()


def canonicalize_axis_angle(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) <= math.pi:
        return v.copy()
    return rotation_to_axis_angle(axis_angle_to_rotation(v))


def right_jacobian(v: np.ndarray) -> np.ndarray:
    """Right Jacobian of SO(3): exp(v + d) ~= exp(v) exp(Jr(v) d)."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    K = skew(v)
    if theta < _SMALL_ANGLE:
        return np.eye(3) - 0.5 * K + (K @ K) / 6.0
    theta2 = theta * theta
    return (
        np.eye(3)
        - (1.0 - math.cos(theta)) / theta2 * K
        + (theta - math.sin(theta)) / (theta2 * theta) * (K @ K)
    )


def relative_angle_deg(R: np.ndarray, R_hat: np.ndarray) -> float:
    """Angle of R^T R_hat in degrees, in [0, 180]."""
    M = np.asarray(R, dtype=float).T @ np.asarray(R_hat, dtype=float)
    # atan2 of the sine and cosine parts stays accurate at both ends of the range
    sin_part = 0.5 * math.sqrt(
        (M[2, 1] - M[1, 2]) ** 2 + (M[0, 2] - M[2, 0]) ** 2 + (M[1, 0] - M[0, 1]) ** 2
    )
    cos_part = 0.5 * (np.trace(M) - 1.0)
    return math.degrees(math.atan2(sin_part, cos_part))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform p -> rotation @ p + translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=float)
        translation = np.array(self.translation, dtype=float).reshape(3)
        if not is_rotation_matrix(rotation):
            raise ValidationError("rotation is not a proper orthonormal 3x3 matrix")
        if not np.all(np.isfinite(translation)):
            raise ValidationError("translation must be finite")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> Pose:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_params(cls, params: np.ndarray) -> Pose:
        """Build from 6 numbers: axis-angle (radians) then translation (meters)."""
        params = np.asarray(params, dtype=float)
        return cls(axis_angle_to_rotation(params[:3]), params[3:6])

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> Pose:
        """Build from the 7-number convention x, y, z, qx, qy, qz, qw."""
        values = np.asarray(values, dtype=float)
        if values.shape != (7,):
            raise ValidationError(f"pose needs 7 numbers, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("pose contains non-finite values")
        q = values[3:]
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUATERNION_NORM_TOL:
            raise ValidationError(f"quaternion norm {norm:.6g} is not unit")
        return cls(Rotation.from_quat(q / norm).as_matrix(), values[:3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map a (3,) point or an (L, 3) array of points."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def quaternion(self) -> np.ndarray:
        """Unit quaternion (qx, qy, qz, qw) with qw >= 0."""
        q = Rotation.from_matrix(np.array(self.rotation)).as_quat()
        return -q if q[3] < 0 else q

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.quaternion()])

    def to_params(self) -> np.ndarray:
        return np.concatenate([rotation_to_axis_angle(self.rotation), self.translation])

    def __repr__(self) -> str:
        rv = np.round(rotation_to_axis_angle(self.rotation), 6)
        t = np.round(self.translation, 6)
        return f"Pose(axis_angle={rv.tolist()}, translation={t.tolist()})"


def compose(a: Pose, b: Pose) -> Pose:
    """a o b: apply b first, then a."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: Pose) -> Pose:
    Rt = a.rotation.T
    return Pose(Rt, -Rt @ a.translation)


def translation_distance(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def average_poses(poses: Sequence[Pose]) -> Pose:
    """Eigenvector quaternion mean plus arithmetic translation mean.

    Quaternions are sign-aligned to the first one, so antipodal
    representations of the same rotation average correctly.
    """
    if not poses:
        raise ValueError("cannot average an empty pose list")
    quats = np.array([p.quaternion() for p in poses])
    ref = quats[0]
    quats = quats * np.where(quats @ ref < 0.0, -1.0, 1.0)[:, None]
    _, vectors = np.linalg.eigh(quats.T @ quats)
    q = vectors[:, -1]
    if q @ ref < 0.0:
        q = -q
    translation = np.mean([p.translation for p in poses], axis=0)
    return Pose(Rotation.from_quat(q).as_matrix(), translation)
