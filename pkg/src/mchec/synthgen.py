"""Deterministic synthetic workcells with exact ground truth.

Cameras sit on a horizontal ring around the robot base and look at the
workcell centre. Every random draw comes from its own Philox substream keyed
by the seed and a purpose tuple, so one pose's dropout or noise never depends
on how many draws another pose consumed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mchec.board import BoardModel
from mchec.cammodel import CameraIntrinsics, in_image, project_points
from mchec.dataset import Dataset, Detection, RobotPose, save_dataset
from mchec.errors import ConfigError, UnknownPreset
from mchec.geom import Pose, axis_angle_to_rotation, compose, invert
from mchec.metrics import GROUND_TRUTH_FILE, GroundTruth
from mchec.solver import ParameterBlock

logger = logging.getLogger(__name__)

WORKCELL_RADII: dict[str, float] = {
    "small": 1.4,
    "medium": 2.0,
    "large": 2.5,
}

PRESET_NAMES = sorted(WORKCELL_RADII.keys())

MIN_RADIUS = 0.8
CAMERA_HEIGHT = 1.6
LOOK_AT = np.array([0.0, 0.0, 0.7])
EE_LOW = np.array([-0.4, -0.4, 0.3])
EE_HIGH = np.array([0.4, 0.4, 1.1])
CAMERA_ROTATION_JITTER_DEG = 5.0
CAMERA_POSITION_JITTER = 0.1
MAX_INCIDENCE_DEG = 75.0
MAX_ATTEMPTS = 100
MAX_ORIENTATION_DRAWS = 1000
MIN_DETECTIONS = 3

DEFAULT_INTRINSICS = CameraIntrinsics(
    fx=900.0,
    fy=900.0,
    cx=640.0,
    cy=360.0,
    image_width=1280,
    image_height=720,
    distortion=(-0.05, 0.01, 5e-4, -3e-4, 0.0),
)

# substream purposes
_CAMERA, _BOARD_TO_EE, _POSE, _DROPOUT, _NOISE = range(5)


@dataclass(frozen=True)
class SynthConfig:
    n_cameras: int = 4
    n_poses: int = 30
    radius: float = WORKCELL_RADII["large"]  # meters
    board: BoardModel = field(default_factory=lambda: BoardModel(rows=3, cols=4, spacing=0.05))
    pixel_noise_sigma: float = 0.5
    detection_dropout: float = 0.1
    seed: int = 0
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    workcell: str | None = None

    def __post_init__(self) -> None:
        if self.n_cameras < 1:
            raise ConfigError(f"need at least one camera, got {self.n_cameras}")
        if self.n_poses < 3:
            raise ConfigError(f"need at least 3 robot poses, got {self.n_poses}")
        if not self.radius > 0:
            raise ConfigError(f"ring radius must be positive, got {self.radius}")
        if self.radius < MIN_RADIUS:
            raise ConfigError(f"ring radius {self.radius} m puts cameras inside the robot workspace (< {MIN_RADIUS} m)")
        if not self.pixel_noise_sigma >= 0:
            raise ConfigError(f"pixel noise sigma must be >= 0, got {self.pixel_noise_sigma}")
        if not 0.0 <= self.detection_dropout < 1.0:
            raise ConfigError(f"detection dropout must lie in [0, 1), got {self.detection_dropout}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class SynthOutput:
    dataset: Dataset
    truth: GroundTruth
    visibility_stats: tuple[int, ...]  # detections per camera

    def write(self, root: Path | str) -> Path:
        root = Path(root)
        save_dataset(self.dataset, root)
        self.truth.save(root / GROUND_TRUTH_FILE)
        return root


def preset(name: str) -> SynthConfig:
    if name not in WORKCELL_RADII:
        raise UnknownPreset(f"unknown workcell preset '{name}' (choose from {', '.join(PRESET_NAMES)})")
    return SynthConfig(radius=WORKCELL_RADII[name], workcell=name)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def look_at(position: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Camera axes in world coordinates as columns: x right, y down, z forward."""
    forward = target - position
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.column_stack([right, down, forward])


def _cameras(config: SynthConfig) -> tuple[list[Pose], np.ndarray]:
    hand_eye, centres = [], []
    for k in range(config.n_cameras):
        rng = _stream(config.seed, _CAMERA, k)
        azimuth = 2.0 * math.pi * k / config.n_cameras
        centre = np.array([config.radius * math.cos(azimuth), config.radius * math.sin(azimuth), CAMERA_HEIGHT])
        centre = centre + rng.uniform(-CAMERA_POSITION_JITTER, CAMERA_POSITION_JITTER, 3)
        jitter = np.radians(rng.uniform(-CAMERA_ROTATION_JITTER_DEG, CAMERA_ROTATION_JITTER_DEG, 3))
        R_wc = look_at(centre, LOOK_AT) @ axis_angle_to_rotation(jitter)
        hand_eye.append(Pose(R_wc.T, -R_wc.T @ centre))
        centres.append(centre)
    return hand_eye, np.array(centres)


def _board_to_ee(config: SynthConfig) -> Pose:
    """Board mounted on the flange with a tilt and a stand-off, centred near the tool axis."""
    rng = _stream(config.seed, _BOARD_TO_EE)
    R = axis_angle_to_rotation(rng.uniform(-0.3, 0.3, 3))
    offset = np.array([rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(0.05, 0.12)])
    return Pose(R, offset - R @ config.board.center())


def _incidence_deg(normal: np.ndarray, board_centre: np.ndarray, camera_centre: np.ndarray) -> float:
    to_camera = camera_centre - board_centre
    cosine = float(normal @ to_camera) / float(np.linalg.norm(to_camera))
    return math.degrees(math.acos(max(-1.0, min(1.0, cosine))))


def _frame_with_normal(normal: np.ndarray, spin: float) -> np.ndarray:
    helper = np.array([0.0, 0.0, 1.0]) if abs(normal[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(helper, normal)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    x = math.cos(spin) * u + math.sin(spin) * v
    return np.column_stack([x, np.cross(normal, x), normal])


def _sample_pose(
    config: SynthConfig, rng: np.random.Generator, Z: Pose, centres: np.ndarray
) -> Pose:
    """End-effector pose whose board faces at least one camera within the incidence limit."""
    for _ in range(MAX_ORIENTATION_DRAWS):
        t_e = rng.uniform(EE_LOW, EE_HIGH)
        k = int(rng.integers(config.n_cameras))
        toward = centres[k, :2] / np.linalg.norm(centres[k, :2])
        azimuth = math.atan2(toward[1], toward[0]) + math.radians(rng.uniform(-60.0, 60.0))
        elevation = math.radians(rng.uniform(0.0, 35.0))
        normal = np.array(
            [math.cos(azimuth) * math.cos(elevation), math.sin(azimuth) * math.cos(elevation), math.sin(elevation)]
        )
        R_board = _frame_with_normal(normal, rng.uniform(0.0, 2.0 * math.pi))
        E = Pose(R_board @ Z.rotation.T, t_e)
        board_centre = compose(E, Z).apply(config.board.center())
        if min(_incidence_deg(normal, board_centre, c) for c in centres) <= MAX_INCIDENCE_DEG:
            return E
    raise ConfigError("could not sample a board orientation facing any camera")


def _observe(
    config: SynthConfig, j: int, k: int, X: Pose, E: Pose, Z: Pose, camera_centre: np.ndarray
) -> np.ndarray | None:
    """Noiseless corner pixels if camera k sees the whole board front face at pose j."""
    board_in_base = compose(E, Z)
    normal = board_in_base.rotation[:, 2]
    if _incidence_deg(normal, board_in_base.apply(config.board.center()), camera_centre) > MAX_INCIDENCE_DEG:
        return None
    pixels, in_front, _ = project_points(compose(X, board_in_base).apply(config.board.corner_points()), config.intrinsics)
    if not in_front.all() or not all(in_image(p, config.intrinsics) for p in pixels):
        return None
    return pixels


def generate(config: SynthConfig) -> SynthOutput:
    hand_eye, centres = _cameras(config)
    Z = _board_to_ee(config)
    L = config.board.corner_count

    for attempt in range(MAX_ATTEMPTS):
        robot_poses, detections = [], {}
        for j in range(config.n_poses):
            E = _sample_pose(config, _stream(config.seed, _POSE, attempt, j), Z, centres)
            robot_poses.append(RobotPose(j, E))
            for k, X in enumerate(hand_eye):
                pixels = _observe(config, j, k, X, E, Z, centres[k])
                if pixels is None:
                    continue
                if _stream(config.seed, _DROPOUT, j, k).random() < config.detection_dropout:
                    continue
                if config.pixel_noise_sigma > 0:
                    pixels = pixels + np.array(
                        [_stream(config.seed, _NOISE, j, k, i).normal(0.0, config.pixel_noise_sigma, 2) for i in range(L)]
                    )
                detections[(j, k)] = Detection(j, k, pixels)

        counts = tuple(sum(1 for (_, kk) in detections if kk == k) for k in range(config.n_cameras))
        if min(counts) >= MIN_DETECTIONS:
            dataset = Dataset(tuple([config.intrinsics] * config.n_cameras), config.board, tuple(robot_poses), detections)
            logger.debug("generated %d detections after %d attempt(s): %s", len(detections), attempt + 1, counts)
            return SynthOutput(dataset, GroundTruth(tuple(hand_eye), Z), counts)
        logger.debug("attempt %d: detections per camera %s, resampling poses", attempt + 1, counts)

    raise ConfigError(
        f"no pose set gave every camera {MIN_DETECTIONS} detections after {MAX_ATTEMPTS} attempts "
        f"(radius {config.radius} m, {config.n_poses} poses)"
    )


def truth_parameters(truth: GroundTruth, dataset: Dataset) -> ParameterBlock:
    """Ground truth as solver parameters with chain-consistent cam-to-cam transforms."""
    pairs = dataset.co_visible_pairs()
    cam_to_cam = {(k, t): compose(truth.hand_eye[k], invert(truth.hand_eye[t])) for k, t in pairs}
    return ParameterBlock.from_poses(truth.hand_eye, truth.board_to_ee, cam_to_cam, pairs)


def mean_apparent_board_size(dataset: Dataset) -> float:
    """Mean diagonal, in pixels, of the detected corners' bounding box."""
    sizes = [float(np.linalg.norm(np.ptp(d.corners, axis=0))) for d in dataset.detections.values()]
    return float(np.mean(sizes))
