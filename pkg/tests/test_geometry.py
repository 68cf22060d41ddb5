from __future__ import annotations

import math

import numpy as np
import pytest

from services.geometry import (
    CameraIntrinsics,
    NonPositiveDepth,
    PixelPoint,
    Pose,
    Rotation,
    backproject,
    look_at,
    project,
    project_points,
    rotation_error,
    rotation_errors,
    translation_error,
)


def _vga() -> CameraIntrinsics:
    return CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)


def _random_pose(rng: np.random.Generator) -> Pose:
    return Pose(Rotation.random(rng), tuple(rng.uniform(-1.0, 1.0, 3)))


class TestRotation:
    def test_quaternion_is_normalized(self):
        rotation = Rotation((2.0, 0.0, 0.0, 0.0))
        assert rotation.q == (1.0, 0.0, 0.0, 0.0)

    def test_matrix_is_orthonormal(self, rng):
        for _ in range(100):
            R = Rotation.random(rng).matrix
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)

    def test_matrix_round_trip(self, rng):
        for _ in range(100):
            rotation = Rotation.random(rng)
            back = Rotation.from_matrix(rotation.matrix)
            np.testing.assert_allclose(back.matrix, rotation.matrix, atol=1e-9)

    def test_zero_quaternion_rejected(self):
        with pytest.raises(ValueError):
            Rotation((0.0, 0.0, 0.0, 0.0))


class TestPose:
    def test_compose_with_inverse_is_identity(self, rng):
        for _ in range(50):
            pose = _random_pose(rng)
            np.testing.assert_allclose((pose @ pose.inverse()).matrix, np.eye(4), atol=1e-9)

    def test_composition_matches_homogeneous_matrices(self, rng):
        for _ in range(50):
            a, b = _random_pose(rng), _random_pose(rng)
            np.testing.assert_allclose((a @ b).matrix, a.matrix @ b.matrix, atol=1e-9)

    def test_composition_is_associative(self, rng):
        a, b, c = _random_pose(rng), _random_pose(rng), _random_pose(rng)
        np.testing.assert_allclose(((a @ b) @ c).matrix, (a @ (b @ c)).matrix, atol=1e-9)

    def test_json_round_trip(self, rng):
        pose = _random_pose(rng)
        back = Pose.from_json(pose.to_json())
        np.testing.assert_allclose(back.rotation.array, pose.rotation.array, atol=1e-15)
        assert back.translation == pose.translation

    def test_non_finite_translation_rejected(self):
        with pytest.raises(ValueError):
            Pose(Rotation(), (0.0, math.nan, 0.0))


class TestIntrinsics:
    def test_principal_point_must_be_inside(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=600.0, fy=600.0, cx=700.0, cy=240.0, width=640, height=480)

    def test_focal_length_must_be_positive(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=0.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)

    def test_pixel_rays_hit_integer_centers(self):
        K = _vga()
        rays = K.pixel_rays()
        assert rays.shape == (480, 640, 3)
        np.testing.assert_allclose(rays[240, 320], [0.0, 0.0, 1.0])
        np.testing.assert_allclose(rays[0, 0], [-320.0 / 600.0, -240.0 / 600.0, 1.0])


class TestProject:
    def test_optical_axis_maps_to_principal_point(self):
        assert project((0.0, 0.0, 1.0), _vga()) == PixelPoint(320.0, 240.0)

    def test_lateral_offset(self):
        pixel = project((0.1, 0.0, 1.0), _vga())
        assert pixel.u == pytest.approx(380.0)
        assert pixel.v == pytest.approx(240.0)

    def test_depth_halves_offset(self):
        pixel = project((0.1, 0.0, 2.0), _vga())
        assert pixel.u == pytest.approx(350.0)
        np.testing.assert_allclose(backproject(pixel, 2.0, _vga()), [0.1, 0.0, 2.0], atol=1e-12)

    def test_behind_camera_raises(self):
        with pytest.raises(NonPositiveDepth):
            project((0.0, 0.0, 1e-7), _vga())
        with pytest.raises(NonPositiveDepth):
            project_points(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]), _vga())

    def test_backprojection_recovers_points(self, rng):
        K = _vga()
        points = np.column_stack([rng.uniform(-1.0, 1.0, (10_000, 2)), rng.uniform(0.2, 3.0, 10_000)])
        pixels = project_points(points, K)
        for point, (u, v) in zip(points[:200], pixels[:200]):
            np.testing.assert_allclose(backproject(PixelPoint(u, v), point[2], K), point, atol=1e-9)
        rays = np.column_stack([(pixels[:, 0] - K.cx) / K.fx, (pixels[:, 1] - K.cy) / K.fy, np.ones(len(points))])
        np.testing.assert_allclose(rays * points[:, 2:3], points, atol=1e-9)


class TestLookAt:
    def test_target_lands_on_optical_axis(self):
        extrinsic = look_at((0.5, -0.4, 0.8), (0.0, 0.0, 0.0))
        target = extrinsic.apply(np.zeros(3))
        assert target[0] == pytest.approx(0.0, abs=1e-12)
        assert target[1] == pytest.approx(0.0, abs=1e-12)
        assert target[2] == pytest.approx(math.sqrt(0.25 + 0.16 + 0.64))

    def test_world_up_points_up_in_image(self):
        extrinsic = look_at((1.0, 0.0, 1.0), (0.0, 0.0, 0.0))
        above = extrinsic.apply(np.array([0.0, 0.0, 0.1]))
        assert above[1] < 0.0


class TestRotationError:
    def test_identical_rotations(self, rng):
        rotation = Rotation.random(rng)
        assert rotation_error(rotation, rotation) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn(self):
        quarter = Rotation.from_axis_angle((0.0, 0.0, 1.0), math.pi / 2)
        assert rotation_error(Rotation(), quarter) == pytest.approx(math.pi / 2)

    def test_matches_trace_formula(self, rng):
        for _ in range(200):
            a, b = Rotation.random(rng), Rotation.random(rng)
            cosine = np.clip((np.trace(a.matrix.T @ b.matrix) - 1.0) / 2.0, -1.0, 1.0)
            assert rotation_error(a, b) == pytest.approx(math.acos(cosine), abs=1e-7)

    def test_matches_quaternion_dot(self, rng):
        for _ in range(200):
            a, b = Rotation.random(rng), Rotation.random(rng)
            dot = min(1.0, abs(float(a.array @ b.array)))
            assert rotation_error(a, b) == pytest.approx(2.0 * math.acos(dot), abs=1e-7)

    def test_metric_axioms(self, rng):
        for _ in range(1000):
            a, b, c = Rotation.random(rng), Rotation.random(rng), Rotation.random(rng)
            ab = rotation_error(a, b)
            assert ab == pytest.approx(rotation_error(b, a), abs=1e-9)
            assert ab <= rotation_error(a, c) + rotation_error(c, b) + 1e-9

    def test_symmetric_flag_ignores_half_turn_about_approach(self, rng):
        a = Rotation.random(rng)
        flipped = a * Rotation.from_axis_angle((0.0, 0.0, 1.0), math.pi)
        assert rotation_error(a, flipped) == pytest.approx(math.pi)
        assert rotation_error(a, flipped, symmetric=True) == pytest.approx(0.0, abs=1e-7)

    def test_vectorized_broadcasting(self, rng):
        qa = np.array([Rotation.random(rng).array for _ in range(3)])
        qb = np.array([Rotation.random(rng).array for _ in range(4)])
        errors = rotation_errors(qa[:, None, :], qb[None, :, :])
        assert errors.shape == (3, 4)
        assert errors[1, 2] == pytest.approx(rotation_error(Rotation(tuple(qa[1])), Rotation(tuple(qb[2]))))


class TestTranslationError:
    def test_identical(self):
        assert translation_error((0.1, 0.2, 0.3), (0.1, 0.2, 0.3)) == 0.0

    def test_loosest_threshold(self):
        assert translation_error((0.0, 0.0, 0.0), (0.03, 0.0, 0.0)) == pytest.approx(0.03)

    def test_pythagorean(self):
        assert translation_error((1.0, 2.0, 2.0), (0.0, 0.0, 0.0)) == pytest.approx(3.0)
