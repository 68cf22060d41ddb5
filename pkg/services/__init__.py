"""Service container definitions for core graspkit services."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .dataset_store import DatasetStore
from .evaluation import EvalThresholds
from .generation import SceneGenerator
from .geometry import CameraIntrinsics
from .gripper import NORMALIZATIONS, GripperGeometry, KeypointTemplate
from .labels import LabelGridSpec
from .pipeline import GraspPipeline
from .scenes.sampling import SceneConfig


@dataclass(frozen=True)
class AppServices:
    scene_config: SceneConfig
    generator: SceneGenerator
    pipeline: GraspPipeline
    template: KeypointTemplate
    geometry: GripperGeometry
    label_spec: LabelGridSpec
    thresholds: EvalThresholds

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return self.scene_config.intrinsics

    def dataset(self, root: Path) -> DatasetStore:
        return DatasetStore(root)


def build_services(app_config: Any) -> AppServices:
    """Builds every service from the upper-case settings of a config class."""
    normalization = str(app_config.OFFSET_NORMALIZATION)
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"OFFSET_NORMALIZATION must be one of {NORMALIZATIONS}, got {normalization!r}")
    intrinsics = CameraIntrinsics(
        fx=float(app_config.CAMERA_FX),
        fy=float(app_config.CAMERA_FY),
        cx=float(app_config.CAMERA_CX),
        cy=float(app_config.CAMERA_CY),
        width=int(app_config.CAMERA_WIDTH),
        height=int(app_config.CAMERA_HEIGHT),
    )
    scene_config = SceneConfig(intrinsics=intrinsics)
    geometry = GripperGeometry(max_width=float(app_config.MAX_GRIPPER_WIDTH))
    template = KeypointTemplate(side=float(app_config.KEYPOINT_SIDE))
    label_spec = LabelGridSpec(
        width=intrinsics.width,
        height=intrinsics.height,
        downsample=int(app_config.LABEL_DOWNSAMPLE),
        bins=int(app_config.ORIENTATION_BINS),
    )
    thresholds = EvalThresholds()
    generator = SceneGenerator(
        scene_config,
        views=int(app_config.VIEWS_PER_SCENE),
        density=int(app_config.TRAIN_DENSITY),
        cloud_points=int(app_config.CLOUD_POINTS_PER_OBJECT),
        geometry=geometry,
        template=template,
        label_spec=label_spec,
        normalization=normalization,
        depth_noise_std=float(app_config.DEPTH_NOISE_STD),
        depth_dropout=float(app_config.DEPTH_DROPOUT),
    )
    pipeline = GraspPipeline(
        intrinsics,
        template=template,
        label_spec=label_spec,
        thresholds=thresholds,
        normalization=normalization,
        peak_threshold=float(app_config.PEAK_THRESHOLD),
    )
    return AppServices(
        scene_config=scene_config,
        generator=generator,
        pipeline=pipeline,
        template=template,
        geometry=geometry,
        label_spec=label_spec,
        thresholds=thresholds,
    )


__all__ = [
    "AppServices",
    "DatasetStore",
    "GraspPipeline",
    "SceneGenerator",
    "build_services",
]
