from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from mchec.board import BoardModel
from mchec.cammodel import CameraIntrinsics, project_points
from mchec.dataset import Dataset, Detection, RobotPose
from mchec.errors import ConfigError, DimensionMismatch
from mchec.geom import Pose, compose, invert
from mchec.initest import build_initial_guess, initial_candidates
from mchec.metrics import gt_errors
from mchec.solver import (
    ParameterBlock,
    SolverOptions,
    calibrate,
    cauchy_cost,
    evaluate_residuals,
    initial_parameters,
    residual_cross,
    residual_rpj,
    single_camera_dataset,
    solve,
    solve_single_camera,
    total_cost,
)
from mchec.synthgen import SynthOutput, truth_parameters
from tests.conftest import guess_from_truth, random_pose


def perturbed(params: ParameterBlock, rng: np.random.Generator, angle: float = 0.02, shift: float = 0.01) -> ParameterBlock:
    noise = np.column_stack([rng.uniform(-angle, angle, (params.block_count, 3)),
                             rng.uniform(-shift, shift, (params.block_count, 3))])
    return params.with_flat(params.flat() + noise.ravel())


def independent_z(params: ParameterBlock) -> ParameterBlock:
    zs = [params.board_to_ee()] * params.n_cameras
    hand_eye = [params.hand_eye(k) for k in range(params.n_cameras)]
    cam_to_cam = {p: params.cam_to_cam(*p) for p in params.pairs}
    return ParameterBlock.from_poses(hand_eye, zs, cam_to_cam, params.pairs)


# --- cost ------------------------------------------------------------------


def test_cauchy_cost_values() -> None:
    assert cauchy_cost(0.0, 2.0) == 0.0
    assert cauchy_cost(4.0, 2.0) == pytest.approx(4.0 * math.log(2.0))
    s = 1e-14
    assert cauchy_cost(s, 1.0) / s == pytest.approx(1.0, abs=1e-12)


def test_cauchy_cost_grows_sublinearly() -> None:
    assert cauchy_cost(1e4, 1.0) < 1e4 * 1e-2


# --- options and parameters -------------------------------------------------


def test_solver_option_defaults() -> None:
    options = SolverOptions()
    assert options.max_iterations == 100
    assert options.gradient_tolerance == 1e-10
    assert options.parameter_tolerance == 1e-10
    assert options.cost_tolerance == 1e-12
    assert options.cauchy_scale == 1.0
    assert options.cross_term_enabled and options.shared_z_enabled


@pytest.mark.parametrize(
    "kwargs", [{"cauchy_scale": 0.0}, {"gradient_tolerance": -1.0}, {"cost_tolerance": float("nan")}, {"max_iterations": 0}]
)
def test_invalid_solver_options(kwargs: dict) -> None:
    with pytest.raises(ConfigError):
        SolverOptions(**kwargs)


def test_parameter_block_layout(noiseless: SynthOutput) -> None:
    d = noiseless.dataset
    params = truth_parameters(noiseless.truth, d)
    pairs = d.co_visible_pairs()
    assert params.block_count == d.n_cameras + 1 + len(pairs)
    assert params.flat().shape == (6 * params.block_count,)
    assert params.pair_row(*pairs[0]) == d.n_cameras + 1

    separate = independent_z(params)
    assert separate.block_count == 2 * d.n_cameras + len(pairs)
    assert separate.board_to_ee_row(2) == d.n_cameras + 2


def test_parameter_block_round_trip(noiseless: SynthOutput) -> None:
    params = truth_parameters(noiseless.truth, noiseless.dataset)
    back = params.with_flat(params.flat())
    for k in range(params.n_cameras):
        assert_allclose(back.hand_eye(k).matrix(), noiseless.truth.hand_eye[k].matrix(), atol=1e-12)
    assert_allclose(back.board_to_ee().matrix(), noiseless.truth.board_to_ee.matrix(), atol=1e-12)


def test_frozen_parameter_block_evaluates(noiseless: SynthOutput) -> None:
    d = noiseless.dataset
    params = truth_parameters(noiseless.truth, d)
    assert not params.values.flags.writeable
    j, k = next(iter(d.detections))
    assert residual_rpj(j, k, params, d).shape == (d.corner_count, 2)
    assert total_cost(params, d).c_total < 1e-12


def test_parameter_block_size_mismatch() -> None:
    with pytest.raises(DimensionMismatch):
        ParameterBlock(2, ((0, 1),), np.zeros((3, 6)))


# --- residuals ---------------------------------------------------------------


def test_truth_residuals_vanish(noiseless: SynthOutput) -> None:
    d = noiseless.dataset
    params = truth_parameters(noiseless.truth, d)
    for j, k in d.detections:
        assert np.abs(residual_rpj(j, k, params, d)).max() < 1e-9
    for matrix in d.cross_matrices():
        for k, t in matrix.pairs():
            assert np.abs(residual_cross(matrix.pose_index, k, t, params, d)).max() < 1e-9


def _toy_dataset() -> tuple[Dataset, Pose]:
    """One camera at the base looking at a board 1 m in front."""
    intr = CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)
    board = BoardModel(rows=3, cols=4, spacing=0.05)
    Z = Pose(np.eye(3), -board.center() + [0.0, 0.0, 1.0])
    robot = tuple(RobotPose(j, Pose.identity()) for j in range(3))
    pixels, _, _ = project_points(Z.apply(board.corner_points()), intr)
    detections = {(j, 0): Detection(j, 0, pixels) for j in range(3)}
    return Dataset((intr,), board, robot, detections), Z


def test_depth_shift_residual_matches_reprojection() -> None:
    d, Z = _toy_dataset()
    shifted = Pose(Z.rotation, Z.translation + [0.0, 0.0, 0.001])
    params = ParameterBlock.from_poses([Pose.identity()], shifted, {})
    residual = residual_rpj(0, 0, params, d)
    expected, _, _ = project_points(shifted.apply(d.board.corner_points()), d.cameras[0])
    assert_allclose(residual, expected - d.detections[(0, 0)].corners, atol=1e-9)
    assert np.abs(residual).max() <= 0.7


def test_behind_camera_residual_is_capped() -> None:
    d, Z = _toy_dataset()
    behind = Pose(Z.rotation, Z.translation - [0.0, 0.0, 2.0])
    params = ParameterBlock.from_poses([Pose.identity()], behind, {})
    residual = residual_rpj(0, 0, params, d)
    assert_allclose(np.linalg.norm(residual, axis=1), 10.0 * d.cameras[0].diagonal)


def test_cam_to_cam_only_moves_cross_residuals(noiseless: SynthOutput) -> None:
    d = noiseless.dataset
    params = truth_parameters(noiseless.truth, d)
    (k, t) = params.pairs[0]
    values = params.values.copy()
    values[params.pair_row(k, t), 3:] += [0.01, 0.0, 0.0]
    moved = ParameterBlock(params.n_cameras, params.pairs, values)
    j = next(m.pose_index for m in d.cross_matrices() if m.entry(k, t))
    assert_allclose(residual_rpj(j, k, moved, d), residual_rpj(j, k, params, d))
    assert np.abs(residual_cross(j, k, t, moved, d)).max() > 1e-3


def test_cross_residual_requires_co_detection(noisy: SynthOutput) -> None:
    d = noisy.dataset
    params = truth_parameters(noisy.truth, d)
    one_sided = [
        (j, k, t)
        for (j, k) in d.detections
        for t in range(d.n_cameras)
        if t != k and (j, t) not in d.detections
    ]
    assert one_sided
    j, k, t = one_sided[0]
    with pytest.raises(DimensionMismatch):
        residual_cross(j, k, t, params, d)


def test_residual_block_accounting(noisy: SynthOutput) -> None:
    d = noisy.dataset
    params = truth_parameters(noisy.truth, d)
    L = d.corner_count
    cross_blocks = sum(int(m.entries.sum()) for m in d.cross_matrices())
    with_cross = evaluate_residuals(params, d, SolverOptions(), with_jacobian=False)
    without = evaluate_residuals(params, d, SolverOptions(cross_term_enabled=False), with_jacobian=False)
    assert without.residual.shape == (2 * L * len(d.detections),)
    assert with_cross.residual.shape == (2 * L * (len(d.detections) + cross_blocks),)
    assert with_cross.report.residual_count == L * (len(d.detections) + cross_blocks)


def test_total_cost_on_truth(noiseless: SynthOutput) -> None:
    report = total_cost(truth_parameters(noiseless.truth, noiseless.dataset), noiseless.dataset)
    assert report.c_total < 1e-12
    assert report.c_total == report.c_rpj + report.c_cross


def test_total_cost_terms(noisy: SynthOutput) -> None:
    d = noisy.dataset
    params = truth_parameters(noisy.truth, d)
    report = total_cost(params, d)
    assert report.c_rpj > 0 and report.c_cross > 0
    assert report.c_total == report.c_rpj + report.c_cross
    assert total_cost(params, d, SolverOptions(cross_term_enabled=False)).c_cross == 0.0
    assert total_cost(params, d, SolverOptions(cross_term_enabled=False)).c_rpj == report.c_rpj


def test_equal_per_camera_z_matches_shared(noisy: SynthOutput) -> None:
    d = noisy.dataset
    shared = truth_parameters(noisy.truth, d)
    separate = independent_z(shared)
    a = total_cost(shared, d)
    b = total_cost(separate, d, SolverOptions(shared_z_enabled=False))
    assert b.c_rpj == pytest.approx(a.c_rpj, rel=1e-14)
    assert b.c_cross == pytest.approx(a.c_cross, rel=1e-14)


def test_single_camera_has_no_cross_cost(noisy: SynthOutput) -> None:
    single = single_camera_dataset(noisy.dataset, 1)
    params = ParameterBlock.from_poses([noisy.truth.hand_eye[1]], noisy.truth.board_to_ee, {})
    assert single.co_visible_pairs() == []
    assert total_cost(params, single).c_cross == 0.0


# --- Jacobian ----------------------------------------------------------------


def _check_jacobian(params: ParameterBlock, d: Dataset, options: SolverOptions) -> None:
    evaluation = evaluate_residuals(params, d, options)
    x = params.flat()
    h = 1e-7
    numeric = np.empty_like(evaluation.jacobian)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        plus = evaluate_residuals(params.with_flat(x + step), d, options, with_jacobian=False).residual
        minus = evaluate_residuals(params.with_flat(x - step), d, options, with_jacobian=False).residual
        numeric[:, i] = (plus - minus) / (2 * h)
    for block in range(params.block_count):
        cols = slice(6 * block, 6 * block + 6)
        scale = max(np.linalg.norm(numeric[:, cols]), 1e-12)
        assert np.linalg.norm(evaluation.jacobian[:, cols] - numeric[:, cols]) / scale < 1e-4


def _jacobian_points(output: SynthOutput, count: int, rng: np.random.Generator):
    d = output.dataset
    truth = truth_parameters(output.truth, d)
    for i in range(count):
        params = perturbed(truth, rng)
        if i % 2:
            yield independent_z(params), SolverOptions(shared_z_enabled=False)
        else:
            yield params, SolverOptions()


def test_jacobian_matches_central_differences(noiseless: SynthOutput, rng: np.random.Generator) -> None:
    for params, options in _jacobian_points(noiseless, 2, rng):
        _check_jacobian(params, noiseless.dataset, options)


@pytest.mark.slow
def test_jacobian_at_twenty_random_points(noiseless: SynthOutput, rng: np.random.Generator) -> None:
    for params, options in _jacobian_points(noiseless, 20, rng):
        _check_jacobian(params, noiseless.dataset, options)


# --- solve ---------------------------------------------------------------------


def test_noiseless_recovery(noiseless: SynthOutput) -> None:
    d = noiseless.dataset
    result = solve(d, build_initial_guess(d))
    assert result.converged
    assert result.termination_reason in {"gradient_tolerance", "parameter_tolerance", "cost_tolerance"}
    e_t, e_theta = gt_errors(result, noiseless.truth)
    assert e_t < 1e-3
    assert e_theta < 1e-4
    assert result.final_cost < 1e-10
    assert max(result.per_camera_rms_reprojection) < 1e-5
    for dt, dr in result.consistency_gaps.values():
        assert dt < 1e-6 and dr < 1e-4


def test_truth_is_a_fixed_point(noiseless: SynthOutput) -> None:
    d = noiseless.dataset
    guess = guess_from_truth(noiseless.truth, d.co_visible_pairs())
    result = solve(d, guess)
    assert result.converged
    assert result.iterations <= 2
    assert result.final_cost < 1e-12
    for X, X_true in zip(result.hand_eye, noiseless.truth.hand_eye):
        assert np.abs(X.to_params() - X_true.to_params()).max() < 1e-10


def test_accepted_costs_never_increase(noisy: SynthOutput) -> None:
    d = noisy.dataset
    result = solve(d, build_initial_guess(d))
    assert result.final_cost <= result.initial_cost
    costs = [result.initial_cost] + [r.cost for r in result.iteration_log if r.accepted]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert result.iterations == len(result.iteration_log)
    assert result.wall_time > 0


def test_solve_is_deterministic(noisy: SynthOutput) -> None:
    d = noisy.dataset
    a = solve(d, build_initial_guess(d))
    b = solve(d, build_initial_guess(d))
    assert a.iterations == b.iterations
    assert a.final_cost == b.final_cost
    for x, y in zip(a.hand_eye, b.hand_eye):
        assert np.array_equal(x.matrix(), y.matrix())


def test_detection_order_does_not_matter(noisy: SynthOutput) -> None:
    d = noisy.dataset
    reversed_order = dict(reversed(list(d.detections.items())))
    shuffled = Dataset(d.cameras, d.board, tuple(reversed(d.robot_poses)), reversed_order)
    a = solve(d, build_initial_guess(d))
    b = solve(shuffled, build_initial_guess(shuffled))
    for x, y in zip(a.hand_eye, b.hand_eye):
        assert_allclose(x.matrix(), y.matrix(), atol=1e-9)


def test_no_cross_reports_zero_cross_cost(noisy: SynthOutput) -> None:
    d = noisy.dataset
    result = solve(d, build_initial_guess(d), SolverOptions(cross_term_enabled=False))
    assert result.cost_report.c_cross == 0.0
    assert set(result.cam_to_cam) == set(d.co_visible_pairs())
    assert all(dt == 0.0 for dt, _ in result.consistency_gaps.values())


def test_independent_z_reports_per_camera_transforms(noisy: SynthOutput) -> None:
    d = noisy.dataset
    result = solve(d, build_initial_guess(d), SolverOptions(shared_z_enabled=False))
    assert len(result.board_to_ee_per_camera) == d.n_cameras
    assert result.final_cost <= result.initial_cost


def test_single_camera_ignores_z_sharing(noisy: SynthOutput) -> None:
    shared = solve_single_camera(noisy.dataset, 2)
    separate = solve_single_camera(noisy.dataset, 2, SolverOptions(shared_z_enabled=False))
    assert shared.cost_report.c_cross == 0.0
    assert separate.final_cost == pytest.approx(shared.final_cost, rel=1e-9)
    assert_allclose(separate.hand_eye[0].matrix(), shared.hand_eye[0].matrix(), atol=1e-8)


def _reference_single_camera_cost(d: Dataset, x0: np.ndarray, scale: float) -> float:
    """Independent minimizer of the robust one-camera reprojection cost."""
    intr = d.cameras[0]
    k1, k2, p1, p2, k3 = intr.distortion
    points = d.board.corner_points()
    keys = sorted(d.detections)
    E = [d.robot_pose(j) for j, _ in keys]
    observed = [d.detections[key].corners for key in keys]

    def pixels(camera_points: np.ndarray) -> np.ndarray:
        x = camera_points[:, 0] / camera_points[:, 2]
        y = camera_points[:, 1] / camera_points[:, 2]
        r2 = x * x + y * y
        radial = 1 + k1 * r2 + k2 * r2**2 + k3 * r2**3
        xd = x * radial + 2 * p1 * x * y + p2 * (r2 + 2 * x * x)
        yd = y * radial + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y
        return np.column_stack([intr.fx * xd + intr.cx, intr.fy * yd + intr.cy])

    def residuals(x: np.ndarray) -> np.ndarray:
        R_x, t_x = Rotation.from_rotvec(x[0:3]).as_matrix(), x[3:6]
        R_z, t_z = Rotation.from_rotvec(x[6:9]).as_matrix(), x[9:12]
        out = []
        for E_j, p in zip(E, observed):
            world = (points @ R_z.T + t_z) @ E_j.rotation.T + E_j.translation
            s = np.sum((pixels(world @ R_x.T + t_x) - p) ** 2, axis=1)
            out.append(np.sqrt(scale**2 * np.log1p(s / scale**2)))
        return np.concatenate(out)

    fit = least_squares(residuals, x0, method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    return float(np.sum(fit.fun**2))


def test_single_camera_matches_reference_minimizer(noisy: SynthOutput) -> None:
    single = single_camera_dataset(noisy.dataset, 0)
    guess = build_initial_guess(single)
    result = solve(single, guess)
    x0 = np.concatenate([guess.hand_eye[0].to_params(), guess.board_to_ee.to_params()])
    reference = _reference_single_camera_cost(single, x0, 1.0)
    assert result.cost_report.c_cross == 0.0
    assert result.final_cost == pytest.approx(reference, rel=1e-9)


def test_cauchy_scale_changes_robust_cost(noisy: SynthOutput) -> None:
    d = noisy.dataset
    params = truth_parameters(noisy.truth, d)
    tight = total_cost(params, d, SolverOptions(cauchy_scale=0.5))
    loose = total_cost(params, d, SolverOptions(cauchy_scale=5.0))
    assert tight.raw_rpj == loose.raw_rpj
    assert tight.c_rpj < loose.c_rpj <= loose.raw_rpj


def test_outlier_is_down_weighted(noisy: SynthOutput) -> None:
    d = noisy.dataset
    key = next(iter(d.detections))
    corners = d.detections[key].corners.copy()
    corners[0] += [40.0, -30.0]
    detections = dict(d.detections)
    detections[key] = Detection(*key, corners)
    corrupted = Dataset(d.cameras, d.board, d.robot_poses, detections)
    result = solve(corrupted, build_initial_guess(corrupted))
    e_t, _ = gt_errors(result, noisy.truth)
    assert e_t < 10.0


def test_max_iterations_cap_is_not_convergence(noisy: SynthOutput) -> None:
    d = noisy.dataset
    result = solve(d, build_initial_guess(d), replace(SolverOptions(), max_iterations=1))
    assert result.iterations == 1
    assert not result.converged
    assert result.termination_reason == "max_iterations"


# --- calibrate -----------------------------------------------------------------


def test_calibrate_noiseless(noiseless: SynthOutput) -> None:
    result = calibrate(noiseless.dataset)
    assert result.converged
    e_t, e_theta = gt_errors(result, noiseless.truth)
    assert e_t < 1e-3
    assert e_theta < 1e-4


def test_calibrate_starts_from_cheapest_candidate(noisy: SynthOutput) -> None:
    d, options = noisy.dataset, SolverOptions()
    costs = [
        total_cost(initial_parameters(d, guess, options), d, options).c_total
        for guess in initial_candidates(d).values()
    ]
    result = calibrate(d, options)
    assert result.converged
    assert result.initial_cost == pytest.approx(min(costs), rel=1e-12)


def test_calibrate_falls_back_when_a_start_stalls(noisy: SynthOutput, monkeypatch: pytest.MonkeyPatch) -> None:
    starts = []

    def stall_first(dataset, initial, options=None):
        starts.append(initial)
        if len(starts) == 1:
            return solve(dataset, initial, replace(options, max_iterations=1))
        return solve(dataset, initial, options)

    monkeypatch.setattr("mchec.solver.solve", stall_first)
    result = calibrate(noisy.dataset)
    assert len(starts) == 2
    assert starts[0] is not starts[1]
    assert result.converged


def test_calibrate_returns_cheapest_run_when_none_converges(noisy: SynthOutput) -> None:
    d = noisy.dataset
    options = replace(SolverOptions(), max_iterations=1)
    runs = [solve(d, guess, options) for guess in initial_candidates(d).values()]
    result = calibrate(d, options)
    assert not result.converged
    assert result.termination_reason == "max_iterations"
    assert result.final_cost == pytest.approx(min(r.final_cost for r in runs), rel=1e-12)


def test_random_pose_helper_is_valid(rng: np.random.Generator) -> None:
    pose = random_pose(rng)
    assert_allclose(compose(pose, invert(pose)).matrix(), np.eye(4), atol=1e-12)
