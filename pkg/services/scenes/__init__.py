"""Synthetic tabletop scenes built from parametric primitives."""

from .collision import SurfaceCloud, grasp_collides
from .families import GraspFamily, families_for
from .primitives import Primitive, PrimitiveKind, contains, sample_surface
from .render import DepthMap, render_depth
from .sampling import (
    Annotation,
    Camera,
    PlacementFailure,
    Scene,
    SceneConfig,
    annotate,
    check_grasp_collision,
    sample_scene,
    sample_views,
    surface_cloud,
)

__all__ = [
    "Annotation",
    "Camera",
    "DepthMap",
    "GraspFamily",
    "PlacementFailure",
    "Primitive",
    "PrimitiveKind",
    "Scene",
    "SceneConfig",
    "SurfaceCloud",
    "annotate",
    "check_grasp_collision",
    "contains",
    "families_for",
    "grasp_collides",
    "render_depth",
    "sample_scene",
    "sample_surface",
    "sample_views",
    "surface_cloud",
]
