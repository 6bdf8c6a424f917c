"""Pinhole camera with 5-parameter Brown-Conrady distortion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mchec.errors import PointBehindCamera, ValidationError

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int
    distortion: tuple[float, float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0, 0.0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "distortion", tuple(float(d) for d in self.distortion))
        if len(self.distortion) != 5:
            raise ValidationError("distortion needs 5 coefficients (k1, k2, p1, p2, k3)")
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.image_width and 0 <= self.cy < self.image_height):
            raise ValidationError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def diagonal(self) -> float:
        return math.hypot(self.image_width, self.image_height)


def project_points(
    points: np.ndarray, intr: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project (L, 3) camera-frame points.

    Returns (pixels (L, 2), in_front mask (L,), jacobian (L, 2, 3)). Rows whose
    depth is not positive get zero pixels and a zero Jacobian; callers must
    consult the mask.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    z = points[:, 2]
    in_front = z > MIN_DEPTH
    inv_z = np.where(in_front, 1.0 / np.where(in_front, z, 1.0), 0.0)
    x = points[:, 0] * inv_z
    y = points[:, 1] * inv_z

    k1, k2, p1, p2, k3 = intr.distortion
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    d_radial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2)
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y

    pixels = np.column_stack([intr.fx * xd + intr.cx, intr.fy * yd + intr.cy])
    pixels[~in_front] = 0.0

    # d(xd, yd) / d(x, y)
    dxd_dx = radial + 2.0 * x * x * d_radial + 2.0 * p1 * y + 6.0 * p2 * x
    dxd_dy = 2.0 * x * y * d_radial + 2.0 * p1 * x + 2.0 * p2 * y
    dyd_dx = 2.0 * x * y * d_radial + 2.0 * p1 * x + 2.0 * p2 * y
    dyd_dy = radial + 2.0 * y * y * d_radial + 6.0 * p1 * y + 2.0 * p2 * x

    # d(x, y) / d(X, Y, Z)
    n = points.shape[0]
    dn = np.zeros((n, 2, 3))
    dn[:, 0, 0] = inv_z
    dn[:, 0, 2] = -x * inv_z
    dn[:, 1, 1] = inv_z
    dn[:, 1, 2] = -y * inv_z

    dd = np.empty((n, 2, 2))
    dd[:, 0, 0] = intr.fx * dxd_dx
    dd[:, 0, 1] = intr.fx * dxd_dy
    dd[:, 1, 0] = intr.fy * dyd_dx
    dd[:, 1, 1] = intr.fy * dyd_dy
    jacobian = dd @ dn
    return pixels, in_front, jacobian


def project(p_cam: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Project a single camera-frame point to pixels."""
    p_cam = np.asarray(p_cam, dtype=float).reshape(3)
    if p_cam[2] <= MIN_DEPTH:
        raise PointBehindCamera(f"point depth {p_cam[2]:.3g} m is not in front of the camera")
    pixels, _, _ = project_points(p_cam[None, :], intr)
    return pixels[0]


def in_image(px: np.ndarray, intr: CameraIntrinsics) -> bool:
    u, v = float(px[0]), float(px[1])
    return 0.0 <= u < intr.image_width and 0.0 <= v < intr.image_height


def undistort_normalized(pixels: np.ndarray, intr: CameraIntrinsics, iterations: int = 10) -> np.ndarray:
    """Pixels -> undistorted normalized coordinates by fixed-point iteration."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    xd = (pixels[:, 0] - intr.cx) / intr.fx
    yd = (pixels[:, 1] - intr.cy) / intr.fy
    k1, k2, p1, p2, k3 = intr.distortion
    x, y = xd.copy(), yd.copy()
    for _ in range(iterations):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        x = (xd - dx) / radial
        y = (yd - dy) / radial
    return np.column_stack([x, y])
