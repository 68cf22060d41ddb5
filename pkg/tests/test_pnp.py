from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import FACING, facing_pose
from services.experiments import distance_sweep
from services.geometry import Pose, Rotation, project_points, rotation_error
from services.gripper import KeypointSet
from services.pnp import (
    BehindCameraSolution,
    DegenerateConfiguration,
    PnPResult,
    gauss_newton_polish,
    reprojection_error,
    solve_planar_pnp,
)


def _keypoints(pose: Pose, template, K) -> KeypointSet:
    return KeypointSet.from_array(project_points(template.world_points(pose), K))


class TestSolvePlanarPnP:
    def test_facing_template_is_recovered(self, intrinsics, template):
        pose = facing_pose(0.6, 0.4)
        result = solve_planar_pnp(_keypoints(pose, template, intrinsics), template, intrinsics)
        assert rotation_error(result.best.rotation, pose.rotation) < 1e-6
        np.testing.assert_allclose(result.best.t, pose.t / template.side, atol=1e-6)

    def test_random_poses(self, intrinsics, template, rng):
        recovered = 0
        while recovered < 40:
            rotation = Rotation.random(rng)
            t = np.array([rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.4, 1.2)])
            pose = Pose(rotation, tuple(t))
            if abs(rotation.matrix[:, 1] @ t) < 0.3 * np.linalg.norm(t):
                continue
            if np.any(template.world_points(pose)[:, 2] <= 0.05):
                continue
            result = solve_planar_pnp(_keypoints(pose, template, intrinsics), template, intrinsics)
            assert result.reprojection_errors[0] < 1e-6
            assert rotation_error(result.best.rotation, rotation) < 1e-5
            np.testing.assert_allclose(result.best.t * template.side, t, atol=1e-6)
            recovered += 1

    def test_candidates_sorted_by_error(self, intrinsics, template):
        pose = facing_pose(1.0, 0.2)
        result = solve_planar_pnp(_keypoints(pose, template, intrinsics), template, intrinsics)
        assert list(result.reprojection_errors) == sorted(result.reprojection_errors)
        assert len(result.candidates) == len(result.reprojection_errors)
        assert 1 <= len(result.candidates) <= 2

    def test_ambiguity_ratio(self):
        poses = (Pose(), Pose())
        assert PnPResult(poses, (0.5, 2.0)).ambiguity_ratio == pytest.approx(0.25)
        assert PnPResult(poses[:1], (0.5,)).ambiguity_ratio == 1.0

    def test_noise_perturbs_within_pixels(self, intrinsics, template, rng):
        pose = facing_pose(0.5, 0.6)
        clean = project_points(template.world_points(pose), intrinsics)
        noisy = KeypointSet.from_array(clean + rng.normal(0.0, 0.3, clean.shape))
        result = solve_planar_pnp(noisy, template, intrinsics)
        assert result.reprojection_errors[0] < 1.0
        assert rotation_error(result.best.rotation, pose.rotation) < math.radians(10.0)

    def test_noisy_solution_matches_refinement_from_truth(self, intrinsics, template, rng):
        solved_rot, oracle_rot, solved_trans, oracle_trans = [], [], [], []
        for _ in range(200):
            heading = rng.uniform(0.0, 2.0 * math.pi)
            tilt = Rotation.from_axis_angle((math.cos(heading), math.sin(heading), 0.0), rng.uniform(0.5, 1.0))
            spin = Rotation.from_axis_angle((0.0, 0.0, 1.0), rng.uniform(0.0, 2.0 * math.pi))
            t = (rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.4, 0.7))
            pose = Pose(tilt * spin * FACING, t)
            truth = template.canonical_pose(pose)
            clean = project_points(template.world_points(pose), intrinsics)
            kps = KeypointSet.from_array(clean + rng.normal(0.0, 1.0, clean.shape))
            best = solve_planar_pnp(kps, template, intrinsics).best
            refined = gauss_newton_polish(truth, kps, template, intrinsics, max_iterations=50)
            solved_rot.append(rotation_error(best.rotation, truth.rotation))
            oracle_rot.append(rotation_error(refined.rotation, truth.rotation))
            solved_trans.append(np.linalg.norm(best.t - truth.t))
            oracle_trans.append(np.linalg.norm(refined.t - truth.t))
        assert np.mean(solved_rot) == pytest.approx(np.mean(oracle_rot), rel=0.1)
        assert np.mean(solved_trans) == pytest.approx(np.mean(oracle_trans), rel=0.1)

    def test_error_does_not_shrink_with_distance(self, intrinsics, template):
        rows = distance_sweep([0.3, 0.9, 1.5], [1.0], 150, 11, intrinsics, template)
        rot = [r.mean_rot_err_deg for r in rows]
        trans = [r.mean_trans_err_m for r in rows]
        assert rot == sorted(rot)
        assert trans == sorted(trans)
        assert rot[-1] > rot[0]

    def test_coincident_keypoints(self, intrinsics, template):
        kps = KeypointSet(((100.0, 100.0), (100.0, 100.0), (120.0, 130.0), (140.0, 90.0)))
        with pytest.raises(DegenerateConfiguration):
            solve_planar_pnp(kps, template, intrinsics)

    def test_collinear_keypoints(self, intrinsics, template):
        kps = KeypointSet(((100.0, 100.0), (110.0, 110.0), (120.0, 120.0), (130.0, 130.0)))
        with pytest.raises((DegenerateConfiguration, BehindCameraSolution)):
            solve_planar_pnp(kps, template, intrinsics)


class TestReprojection:
    def test_exact_pose_has_zero_error(self, intrinsics, template):
        pose = facing_pose(0.8, 0.1)
        kps = _keypoints(pose, template, intrinsics)
        assert reprojection_error(template.canonical_pose(pose), kps, template, intrinsics) == pytest.approx(0.0, abs=1e-9)

    def test_one_pixel_shift(self, intrinsics, template):
        pose = facing_pose(0.8)
        arr = project_points(template.world_points(pose), intrinsics) + np.array([1.0, 0.0])
        error = reprojection_error(template.canonical_pose(pose), KeypointSet.from_array(arr), template, intrinsics)
        assert error == pytest.approx(1.0)

    def test_polish_recovers_from_perturbation(self, intrinsics, template):
        pose = template.canonical_pose(facing_pose(0.7, 0.3))
        kps = _keypoints(template.metric_pose(pose), template, intrinsics)
        start = Pose(Rotation.from_rotvec((0.02, -0.01, 0.015)) * pose.rotation, tuple(pose.t + np.array([0.05, -0.03, 0.1])))
        polished = gauss_newton_polish(start, kps, template, intrinsics)
        assert reprojection_error(polished, kps, template, intrinsics) < 1e-6
        assert rotation_error(polished.rotation, pose.rotation) < 1e-6
