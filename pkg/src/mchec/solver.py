"""Joint multi-camera hand-eye optimizer.

Minimizes c_rpj + c_cross over every hand-eye transform T_W^Ck, the shared
board-to-end-effector transform T_B^E and one transform T_Ct^Ck per ordered
co-visible camera pair, with a per-corner Cauchy loss and Levenberg-Marquardt.

Residual blocks (one 2-vector per board corner):
    direct  (j, k):    pi_k(T_W^Ck . E_j . T_B^E . P_i) - p_ijk
    cross   (j, k, t): pi_k(T_Ct^Ck . T_W^Ct . E_j . T_B^E . P_i) - p_ijk
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.transform import Rotation

from mchec.cammodel import CameraIntrinsics, project_points
from mchec.dataset import Dataset, Detection, cross_matrix, fmt, pose_record
from mchec.errors import ConfigError, DimensionMismatch, NumericalFailure
from mchec.geom import (
    Pose,
    average_poses,
    canonicalize_axis_angle,
    compose,
    invert,
    relative_angle_deg,
    right_jacobian,
    translation_distance,
)
from mchec.initest import InitialGuess, build_initial_guess, initial_candidates

logger = logging.getLogger(__name__)

LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12
LAMBDA_INIT_FACTOR = 1e-4
LAMBDA_ACCEPT = 0.5
LAMBDA_REJECT = 4.0
BEHIND_CAMERA_CAP = 10.0  # times the image diagonal


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-10
    parameter_tolerance: float = 1e-10
    cost_tolerance: float = 1e-12
    cauchy_scale: float = 1.0  # pixels
    cross_term_enabled: bool = True
    shared_z_enabled: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        for name in ("gradient_tolerance", "parameter_tolerance", "cost_tolerance", "cauchy_scale"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")

    def as_record(self) -> dict[str, object]:
        return asdict(self)


@dataclass(frozen=True)
class CostReport:
    c_rpj: float
    c_cross: float
    c_total: float
    residual_count: int
    raw_rpj: float = 0.0
    raw_cross: float = 0.0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    damping: float
    step_norm: float
    accepted: bool


@dataclass(frozen=True)
class CalibrationResult:
    hand_eye: tuple[Pose, ...]
    board_to_ee: Pose
    cam_to_cam: dict[tuple[int, int], Pose]
    final_cost: float
    initial_cost: float
    iterations: int
    converged: bool
    termination_reason: str
    wall_time: float
    per_camera_rms_reprojection: tuple[float, ...]
    options: SolverOptions = field(default_factory=SolverOptions)
    cost_report: CostReport | None = None
    initial_cost_report: CostReport | None = None
    iteration_log: tuple[IterationRecord, ...] = ()
    consistency_gaps: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)
    board_to_ee_per_camera: tuple[Pose, ...] = ()

    def as_record(self) -> dict[str, Any]:
        """JSON-ready mapping; poses use the 7-number convention, floats 12 significant digits."""
        return {
            "converged": self.converged,
            "termination_reason": self.termination_reason,
            "iterations": self.iterations,
            "initial_cost": _number(self.initial_cost),
            "final_cost": _number(self.final_cost),
            "hand_eye": [pose_record(p) for p in self.hand_eye],
            "board_to_ee": pose_record(self.board_to_ee),
            "board_to_ee_per_camera": [pose_record(p) for p in self.board_to_ee_per_camera],
            "cam_to_cam": [
                {"k": k, "t": t, "pose": pose_record(p)} for (k, t), p in sorted(self.cam_to_cam.items())
            ],
            "consistency_gaps": [
                {"k": k, "t": t, "translation_m": _number(dt), "rotation_deg": _number(dr)}
                for (k, t), (dt, dr) in sorted(self.consistency_gaps.items())
            ],
            "per_camera_rms_reprojection": [_number(v) for v in self.per_camera_rms_reprojection],
            "cost_report": _cost_record(self.cost_report),
            "initial_cost_report": _cost_record(self.initial_cost_report),
            "options": self.options.as_record(),
            "iteration_log": [
                {
                    "iteration": r.iteration,
                    "cost": _number(r.cost),
                    "lambda": _number(r.damping),
                    "step_norm": _number(r.step_norm),
                    "accepted": r.accepted,
                }
                for r in self.iteration_log
            ],
            "wall_time": _number(self.wall_time),
        }


def _number(value: float) -> float | None:
    value = float(value)
    return float(fmt(value)) if math.isfinite(value) else None


def _cost_record(report: CostReport | None) -> dict[str, Any] | None:
    if report is None:
        return None
    record: dict[str, Any] = {k: _number(v) for k, v in asdict(report).items()}
    record["residual_count"] = report.residual_count
    return record


# --- parameters ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParameterBlock:
    """Axis-angle + translation rows, one per unknown transform.

    Row order: hand-eye by camera, then the Z row(s) (one shared, or one per
    camera), then cam-to-cam rows in the order of ``pairs``.
    """

    n_cameras: int
    pairs: tuple[tuple[int, int], ...]
    values: np.ndarray  # (block_count, 6)
    shared_z: bool = True

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1, 6)
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if values.shape[0] != self.block_count:
            raise DimensionMismatch(f"expected {self.block_count} parameter blocks, got {values.shape[0]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_pair_rows", {p: i for i, p in enumerate(self.pairs)})

    @classmethod
    def from_poses(
        cls,
        hand_eye: Sequence[Pose],
        board_to_ee: Pose | Sequence[Pose],
        cam_to_cam: Mapping[tuple[int, int], Pose],
        pairs: Sequence[tuple[int, int]] | None = None,
    ) -> ParameterBlock:
        shared = isinstance(board_to_ee, Pose)
        zs = [board_to_ee] if shared else list(board_to_ee)
        if not shared and len(zs) != len(hand_eye):
            raise DimensionMismatch(f"{len(zs)} board-to-ee poses for {len(hand_eye)} cameras")
        pairs = sorted(cam_to_cam) if pairs is None else list(pairs)
        rows = [p.to_params() for p in hand_eye] + [z.to_params() for z in zs]
        rows += [cam_to_cam[p].to_params() for p in pairs]
        return cls(len(hand_eye), tuple(pairs), np.array(rows), shared)

    @property
    def z_count(self) -> int:
        return 1 if self.shared_z else self.n_cameras

    @property
    def block_count(self) -> int:
        return self.n_cameras + self.z_count + len(self.pairs)

    def hand_eye_row(self, k: int) -> int:
        return k

    def board_to_ee_row(self, k: int) -> int:
        return self.n_cameras + (0 if self.shared_z else k)

    def pair_row(self, k: int, t: int) -> int:
        try:
            return self.n_cameras + self.z_count + self._pair_rows[(k, t)]
        except KeyError:
            raise DimensionMismatch(f"no cam-to-cam parameters for pair ({k}, {t})") from None

    def has_pair(self, k: int, t: int) -> bool:
        return (k, t) in self._pair_rows

    def hand_eye(self, k: int) -> Pose:
        return Pose.from_params(self.values[self.hand_eye_row(k)])

    def board_to_ee(self, k: int = 0) -> Pose:
        return Pose.from_params(self.values[self.board_to_ee_row(k)])

    def cam_to_cam(self, k: int, t: int) -> Pose:
        return Pose.from_params(self.values[self.pair_row(k, t)])

    def flat(self) -> np.ndarray:
        return self.values.ravel().copy()

    def with_flat(self, x: np.ndarray) -> ParameterBlock:
        rows = np.array(x, dtype=float).reshape(-1, 6)
        for row in rows:
            row[:3] = canonicalize_axis_angle(row[:3])
        return ParameterBlock(self.n_cameras, self.pairs, rows, self.shared_z)


# --- robust loss -----------------------------------------------------------


def cauchy_cost(squared_norm: float | np.ndarray, scale: float) -> float | np.ndarray:
    """scale^2 * log(1 + s / scale^2)."""
    c2 = scale * scale
    return c2 * np.log1p(np.asarray(squared_norm) / c2)


def cauchy_weight(squared_norm: np.ndarray, scale: float) -> np.ndarray:
    """sqrt(rho'(s)) used to rescale residual and Jacobian rows.

    The Cauchy loss has rho'' < 0 everywhere, so the second-order correction
    term is dropped and the rescaling reduces to sqrt(rho').
    """
    return 1.0 / np.sqrt(1.0 + squared_norm / (scale * scale))


# --- public residuals --------------------------------------------------------


def _chain_residual(chain: Pose, intr: CameraIntrinsics, points: np.ndarray, observed: np.ndarray) -> np.ndarray:
    pixels, in_front, _ = project_points(chain.apply(points), intr)
    residual = pixels - observed
    residual[~in_front] = _behind_camera_residual(intr)
    return residual


def _behind_camera_residual(intr: CameraIntrinsics) -> np.ndarray:
    cap = BEHIND_CAMERA_CAP * intr.diagonal
    return np.full(2, cap / math.sqrt(2.0))


def _require_detection(dataset: Dataset, j: int, k: int) -> Detection:
    det = dataset.detection(j, k)
    if det is None:
        raise DimensionMismatch(f"camera {k} has no detection at pose {j}")
    return det


def residual_rpj(j: int, k: int, params: ParameterBlock, dataset: Dataset) -> np.ndarray:
    """(L, 2) reprojection residuals of camera k at pose j through its hand-eye transform."""
    det = _require_detection(dataset, j, k)
    chain = compose(params.hand_eye(k), compose(dataset.robot_pose(j), params.board_to_ee(k)))
    return _chain_residual(chain, dataset.cameras[k], dataset.board.corner_points(), det.corners)


def residual_cross(j: int, k: int, t: int, params: ParameterBlock, dataset: Dataset) -> np.ndarray:
    """(L, 2) residuals of camera k's corners re-projected through camera t."""
    if cross_matrix(dataset, j).entry(k, t) != 1:
        raise DimensionMismatch(f"cameras {k} and {t} do not co-detect the board at pose {j}")
    det = _require_detection(dataset, j, k)
    chain = compose(
        params.cam_to_cam(k, t),
        compose(params.hand_eye(t), compose(dataset.robot_pose(j), params.board_to_ee(t))),
    )
    return _chain_residual(chain, dataset.cameras[k], dataset.board.corner_points(), det.corners)


# --- problem assembly --------------------------------------------------------


@dataclass(frozen=True)
class _Block:
    pose: int
    camera: int
    through: int | None  # camera t of a cross block, None for a direct block


@dataclass
class Evaluation:
    """Unweighted residuals/Jacobian plus the robust weights and cost."""

    residual: np.ndarray  # (rows,)
    jacobian: np.ndarray | None  # (rows, 6 * block_count)
    weights: np.ndarray  # (rows,) sqrt(rho') repeated per component
    report: CostReport

    def weighted(self) -> tuple[np.ndarray, np.ndarray | None]:
        r = self.weights * self.residual
        J = None if self.jacobian is None else self.jacobian * self.weights[:, None]
        return r, J


def _skew_rows(u: np.ndarray) -> np.ndarray:
    S = np.zeros((len(u), 3, 3))
    S[:, 0, 1], S[:, 0, 2] = -u[:, 2], u[:, 1]
    S[:, 1, 0], S[:, 1, 2] = u[:, 2], -u[:, 0]
    S[:, 2, 0], S[:, 2, 1] = -u[:, 1], u[:, 0]
    return S


def _pose_jacobian(R: np.ndarray, Jr: np.ndarray, u: np.ndarray) -> np.ndarray:
    """d(R(v) u + t) / d(v, t) for every row of u: (L, 3, 6)."""
    out = np.empty((len(u), 3, 6))
    out[:, :, :3] = -(R @ _skew_rows(u)) @ Jr
    out[:, :, 3:] = np.eye(3)
    return out


class _Problem:
    def __init__(self, dataset: Dataset, options: SolverOptions, layout: ParameterBlock) -> None:
        if layout.n_cameras != dataset.n_cameras:
            raise DimensionMismatch(f"parameters cover {layout.n_cameras} cameras, dataset has {dataset.n_cameras}")
        self.dataset = dataset
        self.options = options
        self.layout = layout
        self.points = dataset.board.corner_points()
        self.L = dataset.corner_count

        blocks = [_Block(j, k, None) for (j, k) in dataset.detections]
        if options.cross_term_enabled:
            for matrix in dataset.cross_matrices():
                for k, t in matrix.pairs():
                    if not layout.has_pair(k, t):
                        raise DimensionMismatch(f"no cam-to-cam parameters for co-visible pair ({k}, {t})")
                    blocks.append(_Block(matrix.pose_index, k, t))
        self.blocks = blocks
        self.n_rows = 2 * self.L * len(blocks)
        self.n_params = 6 * layout.block_count

    def evaluate(self, params: ParameterBlock, with_jacobian: bool) -> Evaluation:
        values = params.values
        rotations = Rotation.from_rotvec(np.array(values[:, :3], dtype=float)).as_matrix()
        translations = values[:, 3:]
        right_jacobians = [right_jacobian(v) for v in values[:, :3]] if with_jacobian else None

        residual = np.empty(self.n_rows)
        jacobian = np.zeros((self.n_rows, self.n_params)) if with_jacobian else None
        in_front_all = np.ones(self.n_rows // 2, dtype=bool)
        is_cross = np.zeros(self.n_rows // 2, dtype=bool)

        board_in_base: dict[tuple[int, int], np.ndarray] = {}
        for b, block in enumerate(self.blocks):
            k, j = block.camera, block.pose
            z = params.board_to_ee_row(k if block.through is None else block.through)
            E = self.dataset.robot_pose(j)
            key = (j, z)
            if key not in board_in_base:
                q = self.points @ rotations[z].T + translations[z]
                board_in_base[key] = q @ E.rotation.T + E.translation
            s = board_in_base[key]

            if block.through is None:
                x = params.hand_eye_row(k)
                p = s @ rotations[x].T + translations[x]
            else:
                x = params.hand_eye_row(block.through)
                y = params.pair_row(k, block.through)
                w = s @ rotations[x].T + translations[x]
                p = w @ rotations[y].T + translations[y]

            intr = self.dataset.cameras[k]
            pixels, in_front, proj_jac = project_points(p, intr)
            r = pixels - self.dataset.detections[(j, k)].corners
            r[~in_front] = _behind_camera_residual(intr)

            rows = slice(2 * self.L * b, 2 * self.L * (b + 1))
            residual[rows] = r.ravel()
            corner_rows = slice(self.L * b, self.L * (b + 1))
            in_front_all[corner_rows] = in_front
            is_cross[corner_rows] = block.through is not None

            if jacobian is None:
                continue
            proj_jac[~in_front] = 0.0
            # outer transform (hand-eye for direct, cam-to-cam for cross), then inward
            if block.through is None:
                outer_rot = rotations[x]
                self._add(jacobian, rows, x, proj_jac @ _pose_jacobian(rotations[x], right_jacobians[x], s))
            else:
                self._add(jacobian, rows, y, proj_jac @ _pose_jacobian(rotations[y], right_jacobians[y], w))
                self._add(
                    jacobian, rows, x, proj_jac @ (rotations[y] @ _pose_jacobian(rotations[x], right_jacobians[x], s))
                )
                outer_rot = rotations[y] @ rotations[x]
            dz = (outer_rot @ E.rotation) @ _pose_jacobian(rotations[z], right_jacobians[z], self.points)
            self._add(jacobian, rows, z, proj_jac @ dz)

        squared = residual[0::2] ** 2 + residual[1::2] ** 2
        scale = self.options.cauchy_scale
        robust = cauchy_cost(squared, scale)
        c_rpj = math.fsum(robust[~is_cross])
        c_cross = math.fsum(robust[is_cross])
        report = CostReport(
            c_rpj=c_rpj,
            c_cross=c_cross,
            c_total=c_rpj + c_cross,
            residual_count=len(squared),
            raw_rpj=math.fsum(squared[~is_cross]),
            raw_cross=math.fsum(squared[is_cross]),
        )
        weights = np.repeat(cauchy_weight(squared, scale), 2)
        return Evaluation(residual, jacobian, weights, report)

    def _add(self, jacobian: np.ndarray, rows: slice, block_row: int, block_jac: np.ndarray) -> None:
        cols = slice(6 * block_row, 6 * block_row + 6)
        jacobian[rows, cols] += block_jac.reshape(-1, 6)


def evaluate_residuals(
    params: ParameterBlock, dataset: Dataset, options: SolverOptions | None = None, with_jacobian: bool = True
) -> Evaluation:
    """Stacked residuals (direct blocks by (j, k), then cross blocks by (j, k, t)) and their Jacobian."""
    options = options or SolverOptions()
    return _Problem(dataset, options, params).evaluate(params, with_jacobian)


def total_cost(params: ParameterBlock, dataset: Dataset, options: SolverOptions | None = None) -> CostReport:
    return evaluate_residuals(params, dataset, options, with_jacobian=False).report


# --- solve -------------------------------------------------------------------


def initial_parameters(dataset: Dataset, initial: InitialGuess, options: SolverOptions) -> ParameterBlock:
    pairs = dataset.co_visible_pairs() if options.cross_term_enabled else []
    cam_to_cam = {
        (k, t): initial.cam_to_cam.get((k, t)) or compose(initial.hand_eye[k], invert(initial.hand_eye[t]))
        for k, t in pairs
    }
    if options.shared_z_enabled:
        board_to_ee: Pose | list[Pose] = initial.board_to_ee
    else:
        board_to_ee = list(initial.board_to_ee_per_camera) or [initial.board_to_ee] * dataset.n_cameras
    return ParameterBlock.from_poses(initial.hand_eye, board_to_ee, cam_to_cam, pairs)


def _per_camera_rms(evaluation: Evaluation, problem: _Problem) -> tuple[float, ...]:
    sums = np.zeros(problem.dataset.n_cameras)
    counts = np.zeros(problem.dataset.n_cameras)
    squared = evaluation.residual[0::2] ** 2 + evaluation.residual[1::2] ** 2
    L = problem.L
    for b, block in enumerate(problem.blocks):
        if block.through is None:
            sums[block.camera] += squared[L * b : L * (b + 1)].sum()
            counts[block.camera] += L
    return tuple(float(math.sqrt(s / c)) if c else float("nan") for s, c in zip(sums, counts))


def _build_result(
    params: ParameterBlock,
    problem: _Problem,
    evaluation: Evaluation,
    initial_report: CostReport,
    iterations: int,
    converged: bool,
    reason: str,
    started: float,
    log: list[IterationRecord],
) -> CalibrationResult:
    dataset = problem.dataset
    hand_eye = tuple(params.hand_eye(k) for k in range(dataset.n_cameras))
    if params.shared_z:
        board_to_ee, per_camera_z = params.board_to_ee(), ()
    else:
        per_camera_z = tuple(params.board_to_ee(k) for k in range(dataset.n_cameras))
        board_to_ee = average_poses(per_camera_z)

    cam_to_cam: dict[tuple[int, int], Pose] = {}
    gaps: dict[tuple[int, int], tuple[float, float]] = {}
    for k, t in dataset.co_visible_pairs():
        chained = compose(hand_eye[k], invert(hand_eye[t]))
        estimated = params.cam_to_cam(k, t) if params.has_pair(k, t) else chained
        cam_to_cam[(k, t)] = estimated
        gaps[(k, t)] = (translation_distance(estimated, chained), relative_angle_deg(estimated.rotation, chained.rotation))

    return CalibrationResult(
        hand_eye=hand_eye,
        board_to_ee=board_to_ee,
        cam_to_cam=cam_to_cam,
        final_cost=evaluation.report.c_total,
        initial_cost=initial_report.c_total,
        iterations=iterations,
        converged=converged,
        termination_reason=reason,
        wall_time=time.perf_counter() - started,
        per_camera_rms_reprojection=_per_camera_rms(evaluation, problem),
        options=problem.options,
        cost_report=evaluation.report,
        initial_cost_report=initial_report,
        iteration_log=tuple(log),
        consistency_gaps=gaps,
        board_to_ee_per_camera=per_camera_z,
    )


def solve(dataset: Dataset, initial: InitialGuess, options: SolverOptions | None = None) -> CalibrationResult:
    """Levenberg-Marquardt on the robust joint cost, starting from ``initial``."""
    options = options or SolverOptions()
    started = time.perf_counter()
    params = initial_parameters(dataset, initial, options)
    problem = _Problem(dataset, options, params)

    current = problem.evaluate(params, with_jacobian=True)
    initial_report = current.report
    cost = current.report.c_total
    r, J = current.weighted()
    gradient = J.T @ r
    hessian = J.T @ J
    damping = min(max(LAMBDA_INIT_FACTOR * float(np.max(np.diag(hessian), initial=0.0)), LAMBDA_MIN), LAMBDA_MAX)
    identity = np.eye(problem.n_params)

    log: list[IterationRecord] = []
    iterations = 0
    converged, reason = False, "max_iterations"
    if np.max(np.abs(gradient), initial=0.0) <= options.gradient_tolerance:
        converged, reason = True, "gradient_tolerance"

    while not converged and iterations < options.max_iterations:
        iterations += 1
        try:
            factor = cho_factor(hessian + damping * identity)
            step = -cho_solve(factor, gradient)
        except (LinAlgError, ValueError):
            if damping >= LAMBDA_MAX:
                last = _build_result(
                    params, problem, current, initial_report, iterations, False, "numerical_failure", started, log
                )
                raise NumericalFailure("damped normal equations are not solvable", last) from None
            damping = min(damping * LAMBDA_REJECT, LAMBDA_MAX)
            log.append(IterationRecord(iterations, cost, damping, float("nan"), False))
            continue

        step_norm = float(np.linalg.norm(step))
        x = params.flat()
        if step_norm <= options.parameter_tolerance * (np.linalg.norm(x) + options.parameter_tolerance):
            log.append(IterationRecord(iterations, cost, damping, step_norm, False))
            converged, reason = True, "parameter_tolerance"
            break

        candidate = params.with_flat(x + step)
        trial = problem.evaluate(candidate, with_jacobian=False)
        new_cost = trial.report.c_total
        accepted = new_cost < cost
        logger.debug(
            "iter %d cost %.6e -> %.6e lambda %.3e step %.3e %s",
            iterations, cost, new_cost, damping, step_norm, "accepted" if accepted else "rejected",
        )

        if not accepted:
            log.append(IterationRecord(iterations, cost, damping, step_norm, False))
            if damping >= LAMBDA_MAX:
                reason = "damping_limit"
                break
            damping = min(damping * LAMBDA_REJECT, LAMBDA_MAX)
            continue

        relative_decrease = (cost - new_cost) / cost if cost > 0 else 0.0
        params, cost = candidate, new_cost
        current = problem.evaluate(params, with_jacobian=True)
        r, J = current.weighted()
        gradient = J.T @ r
        hessian = J.T @ J
        log.append(IterationRecord(iterations, cost, damping, step_norm, True))
        damping = max(damping * LAMBDA_ACCEPT, LAMBDA_MIN)

        if relative_decrease <= options.cost_tolerance:
            converged, reason = True, "cost_tolerance"
        elif np.max(np.abs(gradient)) <= options.gradient_tolerance:
            converged, reason = True, "gradient_tolerance"

    result = _build_result(params, problem, current, initial_report, iterations, converged, reason, started, log)
    logger.info(
        "solve finished: %s after %d iterations, cost %.6e -> %.6e",
        reason, iterations, result.initial_cost, result.final_cost,
    )
    return result


def calibrate(dataset: Dataset, options: SolverOptions | None = None) -> CalibrationResult:
    """Joint solve from the cheapest initial candidate.

    Candidates are tried in order of their initial robust cost; the first run
    that converges wins. When none converges the lowest-cost run is returned,
    and NumericalFailure is raised only if every run failed that way.
    """
    options = options or SolverOptions()
    ranked = []
    for name, guess in initial_candidates(dataset).items():
        cost = total_cost(initial_parameters(dataset, guess, options), dataset, options).c_total
        ranked.append((cost if math.isfinite(cost) else math.inf, name, guess))
    ranked.sort(key=lambda item: item[0])

    best: CalibrationResult | None = None
    failure: NumericalFailure | None = None
    for cost, name, guess in ranked:
        logger.info("starting from %s (cost %.6e)", name, cost)
        try:
            result = solve(dataset, guess, options)
        except NumericalFailure as e:
            failure = e
            continue
        if result.converged:
            return result
        logger.info("%s start stopped: %s", name, result.termination_reason)
        if best is None or result.final_cost < best.final_cost:
            best = result
    if best is None:
        assert failure is not None
        raise failure
    return best


def single_camera_dataset(dataset: Dataset, k: int) -> Dataset:
    """The N=1 problem of camera k, renumbered as camera 0."""
    detections = {(j, 0): Detection(j, 0, det.corners) for (j, kk), det in dataset.detections.items() if kk == k}
    return Dataset((dataset.cameras[k],), dataset.board, dataset.robot_poses, detections)


def solve_single_camera(dataset: Dataset, k: int, options: SolverOptions | None = None) -> CalibrationResult:
    single = single_camera_dataset(dataset, k)
    return solve(single, build_initial_guess(single), options)
