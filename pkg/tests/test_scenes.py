from __future__ import annotations

import numpy as np
import pytest

from services.geometry import CameraIntrinsics, Pose, Rotation
from services.gripper import Grasp, GripperGeometry, TablePlane
from services.scenes import (
    Camera,
    PlacementFailure,
    Primitive,
    PrimitiveKind,
    Scene,
    SceneConfig,
    SurfaceCloud,
    annotate,
    contains,
    families_for,
    grasp_collides,
    render_depth,
    sample_scene,
    sample_surface,
    sample_views,
    surface_cloud,
)
from services.scenes.collision import table_violation
from services.scenes.sampling import scene_rng


def _small_config(**overrides) -> SceneConfig:
    K = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=32.0, width=64, height=64)
    return SceneConfig(intrinsics=K, **overrides)


def _resting(kind: PrimitiveKind, sizes: tuple[float, ...], xy=(0.0, 0.0), object_id: int = 1) -> Primitive:
    unplaced = Primitive(kind, sizes, Pose(), object_id=object_id)
    return Primitive(kind, sizes, Pose(Rotation(), (xy[0], xy[1], unplaced.rest_height)), object_id=object_id)


def _top_down_scene(objects: tuple[Primitive, ...], height: float = 1.0) -> Scene:
    K = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=32.0, width=64, height=64)
    extrinsic = Pose.from_rt(np.diag([1.0, -1.0, -1.0]), (0.0, 0.0, height))
    return Scene(objects=objects, camera=Camera(extrinsic, K), seed=0)


class TestPrimitive:
    def test_size_count_checked(self):
        with pytest.raises(ValueError):
            Primitive(PrimitiveKind.CUBOID, (0.1, 0.1), Pose())

    def test_sizes_positive(self):
        with pytest.raises(ValueError):
            Primitive(PrimitiveKind.SPHERE, (0.0,), Pose())

    def test_stick_must_be_thin_and_long(self):
        with pytest.raises(ValueError):
            Primitive(PrimitiveKind.STICK, (0.02, 0.15), Pose())
        with pytest.raises(ValueError):
            Primitive(PrimitiveKind.STICK, (0.01, 0.03), Pose())
        Primitive(PrimitiveKind.STICK, (0.005, 0.1), Pose())

    def test_ring_tube_smaller_than_major_radius(self):
        with pytest.raises(ValueError):
            Primitive(PrimitiveKind.RING, (0.01, 0.02), Pose())

    def test_json_round_trip(self):
        prim = _resting(PrimitiveKind.CYLINDER, (0.03, 0.1), (0.1, -0.05), object_id=3)
        back = Primitive.from_json(prim.to_json())
        assert back.kind is PrimitiveKind.CYLINDER
        assert back.sizes == prim.sizes
        assert back.object_id == 3
        assert prim.to_json()["sizes"] == {"r": 0.03, "h": 0.1}


class TestSurfaceSampling:
    def test_sphere_points_on_surface(self, rng):
        prim = _resting(PrimitiveKind.SPHERE, (0.04,))
        points = sample_surface(prim, 500, rng)
        np.testing.assert_allclose(np.linalg.norm(points - prim.pose.t, axis=1), 0.04, atol=1e-12)

    def test_cuboid_points_on_faces(self, rng):
        prim = _resting(PrimitiveKind.CUBOID, (0.04, 0.06, 0.08))
        local = prim.to_local(sample_surface(prim, 500, rng))
        half = np.array([0.02, 0.03, 0.04])
        on_face = np.isclose(np.abs(local), half, atol=1e-12).any(axis=1)
        assert on_face.all()
        assert np.all(np.abs(local) <= half + 1e-12)

    def test_resting_objects_touch_the_table(self, rng):
        for kind, sizes in (
            (PrimitiveKind.CYLINDER, (0.03, 0.1)),
            (PrimitiveKind.CUBOID, (0.04, 0.05, 0.06)),
            (PrimitiveKind.SEMISPHERE, (0.04,)),
        ):
            points = sample_surface(_resting(kind, sizes), 4000, rng)
            assert points[:, 2].min() == pytest.approx(0.0, abs=1e-9)

    def test_semisphere_stays_above_flat_face(self, rng):
        pose = Pose(Rotation.from_axis_angle((1.0, 0.0, 0.0), 0.7), (0.1, 0.2, 0.3))
        prim = Primitive(PrimitiveKind.SEMISPHERE, (0.04,), pose)
        local = prim.to_local(sample_surface(prim, 3000, rng))
        assert local[:, 2].min() >= -1e-12
        assert np.all(np.linalg.norm(local, axis=1) <= 0.04 + 1e-12)

    def test_cuboid_face_counts_follow_areas(self, rng):
        n = 6000
        prim = _resting(PrimitiveKind.CUBOID, (0.03, 0.05, 0.08))
        local = prim.to_local(sample_surface(prim, n, rng))
        half = np.array([0.015, 0.025, 0.04])
        on_face = np.isclose(np.abs(local), half, atol=1e-12)
        assert np.all(on_face.sum(axis=1) == 1)
        axis = np.argmax(on_face, axis=1)
        face = 2 * axis + (local[np.arange(n), axis] < 0.0)
        counts = np.bincount(face, minlength=6)
        a, b, c = prim.sizes
        areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
        p = areas / areas.sum()
        assert np.all(np.abs(counts - n * p) <= 3.0 * np.sqrt(n * p * (1.0 - p)))

    def test_needs_one_sample(self, rng):
        with pytest.raises(ValueError):
            sample_surface(_resting(PrimitiveKind.SPHERE, (0.04,)), 0, rng)

    def test_contains_center_not_far_point(self):
        prim = _resting(PrimitiveKind.RING, (0.05, 0.01))
        points = np.array([[0.05, 0.0, prim.pose.t[2]], [0.0, 0.0, prim.pose.t[2]], [0.5, 0.5, 0.5]])
        assert contains(prim, points).tolist() == [True, False, False]


class TestSampleScene:
    def test_deterministic(self):
        config = _small_config()
        a = sample_scene(config, multi=True, seed=7, index=3)
        b = sample_scene(config, multi=True, seed=7, index=3)
        assert a.to_json() == b.to_json()

    def test_multi_has_one_of_each_kind(self):
        scene = sample_scene(_small_config(), multi=True, seed=1, index=0)
        assert sorted(p.kind.value for p in scene.objects) == sorted(k.value for k in PrimitiveKind)
        assert [p.object_id for p in scene.objects] == list(range(1, 7))

    def test_single_has_one_object(self):
        scene = sample_scene(_small_config(), multi=False, seed=1, index=4)
        assert len(scene.objects) == 1
        assert not scene.multi

    def test_objects_do_not_overlap(self, rng):
        scene = sample_scene(_small_config(), multi=True, seed=2, index=0)
        for prim in scene.objects:
            points = sample_surface(prim, 500, rng)
            for other in scene.objects:
                if other is not prim:
                    assert not np.any(contains(other, points, margin=-0.004))

    def test_placement_failure(self):
        crowded = _small_config(placement_extent=0.001, max_attempts=5)
        with pytest.raises(PlacementFailure):
            sample_scene(crowded, multi=True, seed=0, index=0)

    def test_camera_looks_at_centroid(self):
        scene = sample_scene(_small_config(), multi=True, seed=5, index=1)
        centroid = np.mean([p.pose.t for p in scene.objects], axis=0)
        in_camera = scene.camera.extrinsic.apply(centroid)
        assert in_camera[0] == pytest.approx(0.0, abs=1e-9)
        assert in_camera[1] == pytest.approx(0.0, abs=1e-9)
        assert 0.6 <= in_camera[2] <= 1.2

    def test_views_share_objects(self):
        config = _small_config()
        scene = sample_scene(config, multi=False, seed=3, index=2)
        views = sample_views(scene, 3, config)
        assert [v.view for v in views] == [0, 1, 2]
        assert all(v.objects == scene.objects for v in views)
        assert views[0].camera == scene.camera
        assert views[1].camera != views[2].camera

    def test_scene_json_round_trip(self):
        scene = sample_scene(_small_config(), multi=True, seed=9, index=0)
        back = Scene.from_json(scene.to_json())
        assert [(p.kind, p.sizes, p.object_id) for p in back.objects] == [(p.kind, p.sizes, p.object_id) for p in scene.objects]
        assert (back.seed, back.index, back.view, back.multi) == (9, 0, 0, True)
        np.testing.assert_allclose(back.camera.extrinsic.matrix, scene.camera.extrinsic.matrix, atol=1e-12)

    def test_salted_streams_differ(self):
        assert scene_rng(0, 0, 0).random() != scene_rng(0, 0, 1).random()


class TestSurfaceCloud:
    def test_shape_and_ids(self):
        scene = sample_scene(_small_config(), multi=True, seed=4, index=0)
        cloud = surface_cloud(scene, 64)
        assert cloud.points.shape == (6 * 64, 3)
        assert sorted(set(cloud.object_ids.tolist())) == list(range(1, 7))
        np.testing.assert_array_equal(surface_cloud(scene, 64).points, cloud.points)

    def test_subset(self):
        scene = sample_scene(_small_config(), multi=True, seed=4, index=0)
        cloud = surface_cloud(scene, 32)
        assert cloud.subset(2).shape == (32, 3)


class TestFamilies:
    def test_wide_sphere_has_no_family(self):
        assert families_for(_resting(PrimitiveKind.SPHERE, (0.06,)), max_width=0.10) == []

    def test_cylinder_side_and_top(self):
        names = [f.name for f in families_for(_resting(PrimitiveKind.CYLINDER, (0.03, 0.1)))]
        assert names == ["cylinder_side", "cylinder_top"]

    def test_grid_size(self):
        (family,) = families_for(_resting(PrimitiveKind.SPHERE, (0.03,)))
        assert len(family.evaluate(4)) == 16

    def test_family_widths_within_limit(self):
        for kind, sizes in (
            (PrimitiveKind.CYLINDER, (0.045, 0.1)),
            (PrimitiveKind.RING, (0.05, 0.012)),
            (PrimitiveKind.CUBOID, (0.03, 0.095, 0.2)),
        ):
            for family in families_for(_resting(kind, sizes), max_width=0.10):
                assert 0.0 < family.width <= 0.10

    def test_sphere_grasps_center_on_sphere(self):
        prim = _resting(PrimitiveKind.SPHERE, (0.03,), (0.1, -0.2))
        (family,) = families_for(prim)
        assert family.width == pytest.approx(0.07)
        for item in family.evaluate(4):
            np.testing.assert_allclose((prim.pose @ item.pose).t, prim.pose.t, atol=1e-9)

    def test_cube_has_three_face_pair_groups(self):
        prim = _resting(PrimitiveKind.CUBOID, (0.04, 0.04, 0.04))
        families = families_for(prim)
        assert [f.name for f in families] == ["cuboid_x", "cuboid_y", "cuboid_z"]
        for closing, family in enumerate(families):
            assert family.width == pytest.approx(0.05)
            for item in family.evaluate(3):
                R = item.pose.rotation.matrix
                np.testing.assert_allclose(np.abs(R[:, 0]), np.eye(3)[closing], atol=1e-12)
                np.testing.assert_allclose(np.sort(np.abs(R[:, 2])), [0.0, 0.0, 1.0], atol=1e-12)

    @pytest.mark.parametrize(
        ("kind", "sizes"),
        [
            (PrimitiveKind.SPHERE, (0.05,)),
            (PrimitiveKind.CYLINDER, (0.05, 0.1)),
            (PrimitiveKind.CUBOID, (0.1, 0.2, 0.2)),
        ],
    )
    def test_span_equal_to_opening_is_kept(self, kind, sizes):
        families = families_for(_resting(kind, sizes), max_width=0.10)
        assert families
        assert families[0].width == pytest.approx(0.10)

    def test_side_grasps_close_across_diameter(self):
        prim = _resting(PrimitiveKind.CYLINDER, (0.03, 0.1))
        side = families_for(prim)[0]
        for item in side.evaluate(3):
            tips = item.pose.apply(np.array([[-0.5 * item.width, 0.0, 0.0], [0.5 * item.width, 0.0, 0.0]]))
            np.testing.assert_allclose(np.linalg.norm(tips[:, :2], axis=1), [0.035, 0.035], atol=1e-12)


class TestAnnotate:
    def test_grasps_respect_table_and_ids(self):
        scene = sample_scene(_small_config(), multi=True, seed=11, index=0)
        annotation = annotate(scene, 3)
        ids = {p.object_id for p in scene.objects}
        assert annotation.grasps
        assert len(annotation.families) == len(annotation.grasps)
        for grasp in annotation.grasps:
            assert grasp.object_id in ids
            assert not table_violation(grasp, TablePlane(), GripperGeometry())

    def test_denser_grid_gives_more_grasps(self):
        scene = sample_scene(_small_config(), multi=False, seed=0, index=5)
        assert len(annotate(scene, 4).grasps) >= len(annotate(scene, 1).grasps)

    def test_density_must_be_positive(self):
        scene = sample_scene(_small_config(), multi=False, seed=0, index=0)
        with pytest.raises(ValueError):
            annotate(scene, 0)


class TestCollision:
    def test_gripper_inside_table_collides(self):
        prim = _resting(PrimitiveKind.SPHERE, (0.03,))
        cloud = SurfaceCloud(np.empty((0, 3)), np.empty(0, dtype=np.int64))
        below = Grasp(Pose(Rotation(), (0.0, 0.0, -0.01)), 0.07, prim.object_id)
        assert grasp_collides(below, cloud, prim.object_id)

    def test_finger_through_target_collides(self):
        cloud = SurfaceCloud(np.array([[0.04, 0.0, 0.52]]), np.array([1]))
        grasp = Grasp(Pose(Rotation(), (0.0, 0.0, 0.5)), 0.07, 1)
        assert grasp_collides(grasp, cloud, 1)

    def test_target_between_fingers_is_fine(self):
        cloud = SurfaceCloud(np.array([[0.0, 0.0, 0.52]]), np.array([1]))
        grasp = Grasp(Pose(Rotation(), (0.0, 0.0, 0.5)), 0.07, 1)
        assert not grasp_collides(grasp, cloud, 1)

    def test_palm_is_exempt_against_target(self):
        grasp = Grasp(Pose(Rotation(), (0.0, 0.0, 0.5)), 0.07, 1)
        in_palm = np.array([[0.0, 0.0, 0.55]])
        assert not grasp_collides(grasp, SurfaceCloud(in_palm, np.array([1])), 1)
        assert grasp_collides(grasp, SurfaceCloud(in_palm, np.array([2])), 1)

    def test_abutting_cuboid_blocks_finger(self, rng):
        target = _resting(PrimitiveKind.CUBOID, (0.04, 0.04, 0.04))
        neighbor = _resting(PrimitiveKind.CUBOID, (0.04, 0.04, 0.04), (0.04, 0.0), object_id=2)
        points = [sample_surface(target, 2000, rng), sample_surface(neighbor, 2000, rng)]
        ids = np.repeat([1, 2], 2000)
        grasp = Grasp(Pose(Rotation(), (0.0, 0.0, 0.02)), 0.05, 1)
        assert grasp_collides(grasp, SurfaceCloud(np.vstack(points), ids), 1)
        assert not grasp_collides(grasp, SurfaceCloud(points[0], ids[:2000]), 1)


class TestRenderDepth:
    def test_top_down_sphere(self):
        sphere = _resting(PrimitiveKind.SPHERE, (0.05,))
        depth = render_depth(_top_down_scene((sphere,)))
        assert depth.depth.shape == (64, 64)
        assert depth.depth[32, 32] == pytest.approx(0.9, abs=1e-9)
        assert depth.mask[32, 32] == 1
        assert depth.depth[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert depth.mask[0, 0] == 0

    def test_top_down_cuboid(self):
        box = _resting(PrimitiveKind.CUBOID, (0.1, 0.1, 0.2))
        depth = render_depth(_top_down_scene((box,)))
        assert depth.depth[32, 32] == pytest.approx(0.8, abs=1e-9)

    def test_no_table_return_looking_up(self):
        K = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=32.0, width=64, height=64)
        upward = Pose.from_rt(np.eye(3), (0.0, 0.0, -1.0))
        depth = render_depth(Scene(objects=(), camera=Camera(upward, K), seed=0))
        assert np.all(depth.depth == 0.0)

    def test_empty_scene_is_table_only(self):
        depth = render_depth(_top_down_scene((), height=0.8))
        np.testing.assert_allclose(depth.depth, 0.8, atol=1e-12)
        assert not depth.mask.any()

    def test_noise_needs_rng(self):
        with pytest.raises(ValueError):
            render_depth(_top_down_scene(()), noise_std=0.01)

    def test_dropout_zeroes_pixels(self):
        depth = render_depth(_top_down_scene(()), dropout=0.5, rng=np.random.default_rng(0))
        zero = np.count_nonzero(depth.depth == 0.0)
        assert 0.4 * 64 * 64 < zero < 0.6 * 64 * 64

