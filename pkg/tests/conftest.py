from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from mchec.geom import Pose, axis_angle_to_rotation, compose, invert
from mchec.initest import InitialGuess
from mchec.metrics import GroundTruth
from mchec.synthgen import SynthConfig, SynthOutput, generate


@pytest.fixture(scope="session")
def noiseless() -> SynthOutput:
    """Four cameras, exact corners, no dropout."""
    return generate(
        SynthConfig(n_cameras=4, n_poses=12, radius=2.0, pixel_noise_sigma=0.0, detection_dropout=0.0, seed=7)
    )


@pytest.fixture(scope="session")
def noisy() -> SynthOutput:
    return generate(SynthConfig(n_cameras=4, n_poses=20, pixel_noise_sigma=0.5, detection_dropout=0.1, seed=11))


@pytest.fixture
def noiseless_dir(tmp_path: Path, noiseless: SynthOutput) -> Path:
    return noiseless.write(tmp_path / "noiseless")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_pose(rng: np.random.Generator, angle: float = 1.0, distance: float = 1.0) -> Pose:
    return Pose(axis_angle_to_rotation(rng.uniform(-angle, angle, 3)), rng.uniform(-distance, distance, 3))


def guess_from_truth(truth: GroundTruth, pairs) -> InitialGuess:
    cam_to_cam = {(k, t): compose(truth.hand_eye[k], invert(truth.hand_eye[t])) for k, t in pairs}
    return InitialGuess(
        hand_eye=truth.hand_eye,
        board_to_ee=truth.board_to_ee,
        cam_to_cam=cam_to_cam,
        board_to_ee_per_camera=tuple([truth.board_to_ee] * len(truth.hand_eye)),
    )
