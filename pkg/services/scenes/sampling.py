"""Seeded tabletop scene sampling, camera placement, annotation, and surface clouds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from ..geometry import CameraIntrinsics, Pose, Rotation, look_at
from ..gripper import Grasp, GripperGeometry, TablePlane, to_gripper_frame
from .collision import SurfaceCloud, body_hits, enclosed_count, grasp_collides, table_violation
from .families import families_for
from .primitives import Primitive, PrimitiveKind, contains, sample_surface

logger = logging.getLogger(__name__)

PLACEMENT_SALT = 0
CAMERA_SALT = 1
CLOUD_SALT = 2
DEPTH_SALT = 3

CLOUD_POINTS_PER_OBJECT = 2048
GRASP_REACH = 0.12

DEFAULT_SIZE_RANGES: dict[PrimitiveKind, tuple[tuple[float, float], ...]] = {
    PrimitiveKind.CYLINDER: ((0.02, 0.05), (0.06, 0.15)),
    PrimitiveKind.RING: ((0.04, 0.06), (0.008, 0.015)),
    PrimitiveKind.STICK: ((0.004, 0.01), (0.08, 0.15)),
    PrimitiveKind.SPHERE: ((0.02, 0.05),),
    PrimitiveKind.SEMISPHERE: ((0.02, 0.05),),
    PrimitiveKind.CUBOID: ((0.03, 0.08), (0.03, 0.08), (0.03, 0.08)),
}

DEFAULT_INTRINSICS = CameraIntrinsics(fx=550.0, fy=550.0, cx=256.0, cy=256.0, width=512, height=512)


class PlacementFailure(RuntimeError):
    pass


def scene_rng(seed: int, index: int, salt: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index), int(salt), *map(int, extra)]))


@dataclass(frozen=True)
class Camera:
    extrinsic: Pose
    intrinsics: CameraIntrinsics

    def to_json(self) -> dict[str, Any]:
        return {"K": self.intrinsics.to_json(), "extrinsic": self.extrinsic.to_json()}

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "Camera":
        return cls(Pose.from_json(payload["extrinsic"]), CameraIntrinsics.from_json(payload["K"]))


@dataclass(frozen=True)
class SceneConfig:
    kinds: tuple[PrimitiveKind, ...] = tuple(PrimitiveKind)
    size_ranges: dict[PrimitiveKind, tuple[tuple[float, float], ...]] = field(
        default_factory=lambda: dict(DEFAULT_SIZE_RANGES)
    )
    placement_extent: float = 0.25
    max_attempts: int = 1000
    separation_margin: float = 0.004
    placement_samples: int = 2048
    distance_range: tuple[float, float] = (0.6, 1.2)
    elevation_range_deg: tuple[float, float] = (30.0, 75.0)
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS


@dataclass(frozen=True)
class Scene:
    objects: tuple[Primitive, ...]
    camera: Camera
    seed: int
    index: int = 0
    view: int = 0
    multi: bool = False

    def object_by_id(self, object_id: int) -> Primitive:
        for prim in self.objects:
            if prim.object_id == object_id:
                return prim
        raise KeyError(object_id)

    def to_json(self) -> dict[str, Any]:
        return {
            "objects": [prim.to_json() for prim in self.objects],
            "camera": self.camera.to_json(),
            "seed": self.seed,
            "index": self.index,
            "view": self.view,
            "multi": self.multi,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "Scene":
        return cls(
            objects=tuple(Primitive.from_json(o) for o in payload["objects"]),
            camera=Camera.from_json(payload["camera"]),
            seed=int(payload["seed"]),
            index=int(payload.get("index", 0)),
            view=int(payload.get("view", 0)),
            multi=bool(payload.get("multi", False)),
        )


@dataclass(frozen=True)
class Annotation:
    grasps: tuple[Grasp, ...]
    families: tuple[str, ...]
    pruned_by_table: int = 0
    pruned_by_collision: int = 0
    pruned_empty: int = 0


def _draw_sizes(kind: PrimitiveKind, config: SceneConfig, rng: np.random.Generator) -> tuple[float, ...]:
    return tuple(float(rng.uniform(lo, hi)) for lo, hi in config.size_ranges[kind])


def _separated(candidate: Primitive, placed: list[Primitive], config: SceneConfig, rng: np.random.Generator) -> bool:
    for other in placed:
        gap = math.dist(candidate.pose.translation[:2], other.pose.translation[:2])
        if gap >= candidate.footprint_radius + other.footprint_radius:
            continue
        mine = sample_surface(candidate, config.placement_samples, rng)
        theirs = sample_surface(other, config.placement_samples, rng)
        margin = config.separation_margin
        if np.any(contains(other, mine, margin)) or np.any(contains(candidate, theirs, margin)):
            return False
    return True


def sample_camera(centroid: np.ndarray, config: SceneConfig, rng: np.random.Generator) -> Camera:
    distance = rng.uniform(*config.distance_range)
    elevation = math.radians(rng.uniform(*config.elevation_range_deg))
    azimuth = rng.uniform(0.0, 2.0 * math.pi)
    direction = np.array(
        [math.cos(elevation) * math.cos(azimuth), math.cos(elevation) * math.sin(azimuth), math.sin(elevation)]
    )
    return Camera(look_at(centroid + distance * direction, centroid), config.intrinsics)


def sample_scene(config: SceneConfig, multi: bool, seed: int, index: int = 0) -> Scene:
    """Places one object (single) or one of each kind (multi) by rejection sampling."""
    rng = scene_rng(seed, index, PLACEMENT_SALT)
    kinds = list(config.kinds) if multi else [config.kinds[int(rng.integers(len(config.kinds)))]]
    placed: list[Primitive] = []
    rejections = 0
    for object_id, kind in enumerate(kinds, start=1):
        sizes = _draw_sizes(kind, config, rng)
        color = int(rng.integers(0, 16))
        while True:
            x, y = rng.uniform(-config.placement_extent, config.placement_extent, size=2)
            yaw = rng.uniform(0.0, 2.0 * math.pi)
            unplaced = Primitive(kind, sizes, Pose(), color, object_id)
            pose = Pose(Rotation.from_axis_angle((0.0, 0.0, 1.0), yaw), (x, y, unplaced.rest_height))
            candidate = replace(unplaced, pose=pose)
            if _separated(candidate, placed, config, rng):
                placed.append(candidate)
                break
            rejections += 1
            if rejections >= config.max_attempts:
                raise PlacementFailure(f"Scene {index}: no valid placement after {rejections} rejections")

    centroid = np.mean([prim.pose.t for prim in placed], axis=0)
    camera = sample_camera(centroid, config, scene_rng(seed, index, CAMERA_SALT, 0))
    logger.debug("Scene %d placed %d objects after %d rejections", index, len(placed), rejections)
    return Scene(objects=tuple(placed), camera=camera, seed=seed, index=index, view=0, multi=multi)


def sample_views(scene: Scene, views: int, config: SceneConfig) -> list[Scene]:
    centroid = np.mean([prim.pose.t for prim in scene.objects], axis=0)
    return [
        replace(scene, camera=sample_camera(centroid, config, scene_rng(scene.seed, scene.index, CAMERA_SALT, v)), view=v)
        for v in range(views)
    ]


def surface_cloud(scene: Scene, n_per_object: int = CLOUD_POINTS_PER_OBJECT) -> SurfaceCloud:
    if n_per_object < 1:
        raise ValueError("Need at least one cloud point per object")
    rng = scene_rng(scene.seed, scene.index, CLOUD_SALT)
    points = [sample_surface(prim, n_per_object, rng) for prim in scene.objects]
    ids = [np.full(n_per_object, prim.object_id, dtype=np.int64) for prim in scene.objects]
    if not points:
        return SurfaceCloud(np.empty((0, 3)), np.empty(0, dtype=np.int64))
    return SurfaceCloud(np.concatenate(points), np.concatenate(ids))


def check_grasp_collision(
    grasp: Grasp,
    scene: Scene,
    target_id: int,
    cloud: Optional[SurfaceCloud] = None,
    geometry: GripperGeometry = GripperGeometry(),
) -> bool:
    return grasp_collides(grasp, cloud if cloud is not None else surface_cloud(scene), target_id, geometry, TablePlane())


def annotate(
    scene: Scene,
    density: int,
    cloud: Optional[SurfaceCloud] = None,
    geometry: GripperGeometry = GripperGeometry(),
) -> Annotation:
    """World-frame grasps from every object's families on an even parameter grid."""
    if density < 1:
        raise ValueError("Annotation density must be at least 1")
    cloud = cloud if cloud is not None else surface_cloud(scene)
    table = TablePlane()
    grasps: list[Grasp] = []
    names: list[str] = []
    pruned_table = pruned_collision = pruned_empty = 0
    for prim in scene.objects:
        for family in families_for(prim, geometry.max_width):
            for item in family.evaluate(density):
                grasp = Grasp(prim.pose @ item.pose, item.width, prim.object_id)
                if table_violation(grasp, table, geometry):
                    pruned_table += 1
                    continue
                near = np.sum((cloud.points - grasp.pose.t) ** 2, axis=1) < GRASP_REACH**2
                local = to_gripper_frame(grasp.pose, cloud.points[near])
                is_target = cloud.object_ids[near] == prim.object_id
                if body_hits(local[~is_target], grasp.width, geometry) or body_hits(
                    local[is_target], grasp.width, geometry, include_palm=False
                ):
                    pruned_collision += 1
                    continue
                if enclosed_count(local[is_target], grasp.width, geometry) < 1:
                    pruned_empty += 1
                    continue
                grasps.append(grasp)
                names.append(family.name)
    logger.debug(
        "Scene %d: %d grasps (pruned table=%d collision=%d empty=%d)",
        scene.index,
        len(grasps),
        pruned_table,
        pruned_collision,
        pruned_empty,
    )
    return Annotation(tuple(grasps), tuple(names), pruned_table, pruned_collision, pruned_empty)


__all__ = [
    "Annotation",
    "Camera",
    "CLOUD_POINTS_PER_OBJECT",
    "DEFAULT_INTRINSICS",
    "DEPTH_SALT",
    "PlacementFailure",
    "Scene",
    "SceneConfig",
    "annotate",
    "check_grasp_collision",
    "sample_camera",
    "sample_scene",
    "sample_views",
    "scene_rng",
    "surface_cloud",
]
