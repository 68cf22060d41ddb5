from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import FACING, facing_pose
from services.geometry import PixelPoint, Pose, Rotation, project_points
from services.gripper import (
    BehindCamera,
    BinSpec,
    DegenerateTranslation,
    Grasp,
    GraspEncoding,
    GripperGeometry,
    KeypointSet,
    KeypointTemplate,
    OutOfFrame,
    TablePlane,
    decode_keypoints,
    encode,
    points_in_box,
    refine_scale,
    to_gripper_frame,
)
from services.pnp import solve_planar_pnp


def _random_visible_grasp(rng: np.random.Generator) -> Grasp:
    while True:
        rotation = Rotation.random(rng)
        distance = rng.uniform(0.4, 1.5)
        direction = np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 1.0])
        t = distance * direction / np.linalg.norm(direction)
        grasp = Grasp(Pose(rotation, tuple(t)), float(rng.uniform(0.02, 0.1)))
        points = KeypointTemplate().world_points(grasp.pose)
        if np.all(points[:, 2] > 0.1):
            return grasp


class TestKeypointTemplate:
    def test_unit_square_layout(self, template):
        arr = template.array
        np.testing.assert_allclose(arr[0], [-0.5, 0.0, 0.0])
        np.testing.assert_allclose(arr[1], [0.5, 0.0, 0.0])
        np.testing.assert_allclose(arr[3] - arr[1], [0.0, 0.0, 1.0])
        assert np.all(arr[:, 1] == 0.0)

    def test_world_points_scale_by_side(self, template):
        points = template.world_points(Pose())
        np.testing.assert_allclose(points[1] - points[0], [0.1, 0.0, 0.0])

    def test_rejects_out_of_plane_points(self):
        with pytest.raises(ValueError):
            KeypointTemplate(points=((0.0, 0.1, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 1.0)))


class TestBinSpec:
    def test_horizontal_segment_is_bin_zero(self):
        assert BinSpec(9).bin_of(0.0) == 0

    def test_ninety_five_degrees(self):
        assert BinSpec(9).bin_of(math.radians(95.0)) == 4

    def test_swapping_tips_keeps_bin(self, rng):
        bins = BinSpec(9)
        for theta in rng.uniform(-math.pi, math.pi, 200):
            assert bins.bin_of(theta) == bins.bin_of(theta + math.pi)

    def test_last_bin_is_clamped(self):
        assert BinSpec(9).bin_of(math.pi - 1e-15) == 8

    def test_needs_one_bin(self):
        with pytest.raises(ValueError):
            BinSpec(0)


class TestEncode:
    def test_scale_is_translation_norm(self, intrinsics):
        enc = encode(Grasp(Pose(Rotation(), (0.0, 0.0, 0.5)), 0.08), intrinsics)
        assert enc.scale == pytest.approx(0.5)
        assert enc.width == pytest.approx(0.08)
        assert enc.bin == 0

    def test_center_is_projected_tip_midpoint(self, intrinsics):
        enc = encode(Grasp(Pose(Rotation(), (0.05, -0.02, 0.5)), 0.05), intrinsics)
        assert enc.center.u == pytest.approx(550.0 * 0.1 + 256.0)
        assert enc.center.v == pytest.approx(550.0 * -0.04 + 256.0)

    def test_offsets_times_scale_are_raw_pixels(self, intrinsics, template, rng):
        grasp = _random_visible_grasp(rng)
        enc = encode(grasp, intrinsics)
        keypoints = project_points(template.world_points(grasp.pose), intrinsics)
        np.testing.assert_allclose(enc.offsets_array * enc.scale, keypoints - enc.center.array, atol=1e-9)

    def test_multiply_normalization_is_invariant_to_distance(self, intrinsics):
        near = encode(Grasp(facing_pose(0.5), 0.05), intrinsics, normalization="multiply")
        far = encode(Grasp(facing_pose(1.0), 0.05), intrinsics, normalization="multiply")
        np.testing.assert_allclose(far.raw_offsets(), 0.5 * near.raw_offsets(), rtol=1e-6)
        np.testing.assert_allclose(far.offsets_array, near.offsets_array, rtol=1e-6)

    def test_behind_camera(self, intrinsics):
        with pytest.raises(BehindCamera):
            encode(Grasp(Pose(Rotation(), (0.0, 0.0, -0.5)), 0.05), intrinsics)

    def test_out_of_frame(self, intrinsics):
        with pytest.raises(OutOfFrame):
            encode(Grasp(Pose(Rotation(), (0.6, 0.0, 0.5)), 0.05), intrinsics)


class TestDecodeKeypoints:
    def test_round_trip_matches_projection(self, intrinsics, template, rng):
        for _ in range(500):
            grasp = _random_visible_grasp(rng)
            try:
                enc = encode(grasp, intrinsics)
            except OutOfFrame:
                continue
            expected = project_points(template.world_points(grasp.pose), intrinsics)
            np.testing.assert_allclose(decode_keypoints(enc).array, expected, atol=1e-9)

    def test_zero_offsets_collapse_to_center(self):
        enc = GraspEncoding(PixelPoint(100.0, 50.0), 0, ((0.0, 0.0),) * 4, 0.7, 0.05)
        np.testing.assert_allclose(decode_keypoints(enc).array, [[100.0, 50.0]] * 4)

    def test_offsets_scale_arithmetic(self):
        offsets = ((3.0, 0.0), (-3.0, 0.0), (3.0, 1.0), (-3.0, 1.0))
        enc = GraspEncoding(PixelPoint(100.0, 50.0), 0, offsets, 2.0, 0.05)
        np.testing.assert_allclose(decode_keypoints(enc).array[0], [106.0, 50.0])


class TestGraspEncoding:
    def test_rejects_non_positive_scale(self):
        with pytest.raises(ValueError):
            GraspEncoding(PixelPoint(1.0, 1.0), 0, ((0.0, 0.0),) * 4, 0.0, 0.05)

    def test_rejects_confidence_above_one(self):
        with pytest.raises(ValueError):
            GraspEncoding(PixelPoint(1.0, 1.0), 0, ((0.0, 0.0),) * 4, 1.0, 0.05, confidence=1.5)

    def test_json_round_trip(self, intrinsics, rng):
        enc = encode(_random_visible_grasp(rng), intrinsics)
        assert GraspEncoding.from_json(enc.to_json()) == enc


class TestRefineScale:
    def test_pure_rescale(self):
        rotation = Rotation.from_axis_angle((0.0, 1.0, 0.0), 0.4)
        refined = refine_scale(Pose(rotation, (0.0, 0.0, 2.0)), 0.5)
        np.testing.assert_allclose(refined.t, [0.0, 0.0, 0.5])
        np.testing.assert_allclose(refined.rotation.matrix, rotation.matrix, atol=1e-12)

    def test_identity_scale(self, rng):
        pose = Pose(Rotation.random(rng), (0.3, -0.2, 1.1))
        refined = refine_scale(pose, float(np.linalg.norm(pose.t)))
        np.testing.assert_allclose(refined.t, pose.t, atol=1e-12)

    def test_direction_preserved(self, rng):
        for _ in range(100):
            pose = Pose(Rotation.random(rng), tuple(rng.uniform(-2.0, 2.0, 3)))
            scale = float(rng.uniform(0.1, 3.0))
            refined = refine_scale(pose, scale)
            assert np.linalg.norm(refined.t) == pytest.approx(scale, abs=1e-12)
            np.testing.assert_allclose(np.cross(refined.t, pose.t), 0.0, atol=1e-9)

    def test_degenerate_translation(self):
        with pytest.raises(DegenerateTranslation):
            refine_scale(Pose(Rotation(), (0.0, 0.0, 1e-12)), 1.0)


class TestNoiselessRecovery:
    def test_encode_decode_pnp_refine(self, intrinsics, template, rng):
        checked = 0
        while checked < 50:
            grasp = _random_visible_grasp(rng)
            try:
                enc = encode(grasp, intrinsics)
            except OutOfFrame:
                continue
            normal = grasp.pose.rotation.matrix[:, 1]
            if abs(normal @ grasp.pose.t) < 0.2 * np.linalg.norm(grasp.pose.t):
                continue
            result = solve_planar_pnp(decode_keypoints(enc), template, intrinsics)
            recovered = refine_scale(result.best, enc.scale)
            angle = np.arccos(np.clip((np.trace(recovered.rotation.matrix.T @ grasp.pose.rotation.matrix) - 1) / 2, -1, 1))
            assert angle < 1e-5
            np.testing.assert_allclose(recovered.t, grasp.pose.t, atol=1e-7 * np.linalg.norm(grasp.pose.t) + 1e-9)
            checked += 1


class TestGripperGeometry:
    def test_finger_boxes_flank_closing_region(self):
        geometry = GripperGeometry()
        left, right = geometry.finger_boxes(0.06)
        np.testing.assert_allclose(left[1][0], -0.03)
        np.testing.assert_allclose(right[0][0], 0.03)
        lo, hi = geometry.closing_box(0.06)
        assert lo[0] == pytest.approx(-0.03) and hi[0] == pytest.approx(0.03)

    def test_points_on_faces_are_outside(self):
        box = (np.array([0.0, 0.0, 0.0]), np.array([1.0, 1.0, 1.0]))
        inside = points_in_box(np.array([[0.5, 0.5, 0.5], [1.0, 0.5, 0.5], [0.0, 0.2, 0.2]]), box)
        assert inside.tolist() == [True, False, False]

    def test_to_gripper_frame_inverts_pose(self, rng):
        pose = Pose(Rotation.random(rng), (0.1, 0.2, 0.3))
        local = rng.uniform(-0.1, 0.1, (20, 3))
        np.testing.assert_allclose(to_gripper_frame(pose, pose.apply(local)), local, atol=1e-12)

    def test_body_corners(self):
        corners = GripperGeometry().body_corners(Pose(), 0.05)
        assert corners.shape == (24, 3)
        assert corners[:, 2].min() == pytest.approx(0.0)
        assert corners[:, 2].max() == pytest.approx(0.06)


class TestTablePlane:
    def test_world_table(self):
        plane = TablePlane()
        np.testing.assert_allclose(plane.heights(np.array([[0.0, 0.0, 0.2], [1.0, 1.0, -0.1]])), [0.2, -0.1])

    def test_from_extrinsic_preserves_heights(self, rng):
        extrinsic = Pose(Rotation.random(rng), (0.1, -0.3, 0.9))
        points = rng.uniform(-0.5, 0.5, (10, 3))
        plane = TablePlane.from_extrinsic(extrinsic)
        np.testing.assert_allclose(plane.heights(extrinsic.apply(points)), points[:, 2], atol=1e-12)


def test_keypoint_set_degeneracy():
    kps = KeypointSet(((0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)))
    assert kps.is_degenerate()
    assert KeypointSet.from_array(np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])).min_separation() > 1.0


def test_facing_rotation_puts_plane_normal_on_axis():
    assert FACING.matrix[:, 1] @ np.array([0.0, 0.0, 1.0]) == pytest.approx(-1.0)
