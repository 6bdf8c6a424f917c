from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mchec.cammodel import CameraIntrinsics, in_image, project, project_points, undistort_normalized
from mchec.errors import PointBehindCamera, ValidationError

DISTORTED = CameraIntrinsics(
    fx=900.0, fy=910.0, cx=640.0, cy=360.0, image_width=1280, image_height=720,
    distortion=(-0.05, 0.01, 5e-4, -3e-4, 0.002),
)


def test_optical_axis_hits_principal_point() -> None:
    assert_allclose(project([0.0, 0.0, 2.0], DISTORTED), [640.0, 360.0])


def test_pinhole_without_distortion() -> None:
    intr = CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)
    assert_allclose(project([0.1, -0.2, 1.0], intr), [380.0, 120.0])


def test_radial_distortion_single_term() -> None:
    intr = CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480, distortion=(-0.1, 0.0, 0.0, 0.0, 0.0))
    # r^2 = 0.0125, radial factor 1 - 0.1 r^2 = 0.99875
    assert_allclose(project([0.1, 0.05, 1.0], intr), [379.925, 269.9625], atol=1e-9)


def test_behind_camera_raises() -> None:
    with pytest.raises(PointBehindCamera):
        project([0.0, 0.0, -1.0], DISTORTED)
    with pytest.raises(PointBehindCamera):
        project([0.1, 0.0, 0.0], DISTORTED)


def test_behind_camera_rows_are_masked() -> None:
    pixels, in_front, jacobian = project_points(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]), DISTORTED)
    assert in_front.tolist() == [True, False]
    assert_allclose(pixels[1], 0.0)
    assert_allclose(jacobian[1], 0.0)


def test_jacobian_matches_central_differences(rng: np.random.Generator) -> None:
    points = np.column_stack([rng.uniform(-0.5, 0.5, (10, 2)), rng.uniform(0.8, 3.0, 10)])
    _, _, jacobian = project_points(points, DISTORTED)
    h = 1e-7
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        plus, _, _ = project_points(points + step, DISTORTED)
        minus, _, _ = project_points(points - step, DISTORTED)
        assert_allclose((plus - minus) / (2 * h), jacobian[:, :, axis], rtol=1e-5, atol=1e-4)


def test_undistort_inverts_projection(rng: np.random.Generator) -> None:
    points = np.column_stack([rng.uniform(-0.6, 0.6, (20, 2)), rng.uniform(1.0, 2.0, 20)])
    pixels, _, _ = project_points(points, DISTORTED)
    normalized = undistort_normalized(pixels, DISTORTED, iterations=20)
    assert_allclose(normalized, points[:, :2] / points[:, 2:], atol=1e-9)


def test_in_image_bounds() -> None:
    assert in_image(np.array([0.0, 0.0]), DISTORTED)
    assert in_image(np.array([1279.9, 719.9]), DISTORTED)
    assert not in_image(np.array([1280.0, 100.0]), DISTORTED)
    assert not in_image(np.array([100.0, -0.1]), DISTORTED)


def test_matrix_and_diagonal() -> None:
    assert_allclose(DISTORTED.matrix, [[900.0, 0.0, 640.0], [0.0, 910.0, 360.0], [0.0, 0.0, 1.0]])
    assert DISTORTED.diagonal == pytest.approx(np.hypot(1280, 720))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"fx": 0.0},
        {"fy": -1.0},
        {"cx": 1280.0},
        {"cy": -1.0},
        {"distortion": (0.0, 0.0, 0.0)},
    ],
)
def test_invalid_intrinsics(kwargs: dict) -> None:
    values = dict(fx=900.0, fy=900.0, cx=640.0, cy=360.0, image_width=1280, image_height=720)
    values.update(kwargs)
    with pytest.raises(ValidationError):
        CameraIntrinsics(**values)
