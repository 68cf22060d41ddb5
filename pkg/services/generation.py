"""Scene generation service: sample, render, annotate, and label one scene at a time."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .dataset_store import DatasetStore, SceneRecord
from .gripper import BehindCamera, GripperGeometry, KeypointTemplate, OutOfFrame, encode
from .labels import LabelGridSpec, LabelTensors, render_labels
from .scenes.collision import SurfaceCloud
from .scenes.render import DepthMap, render_depth
from .scenes.sampling import (
    DEPTH_SALT,
    Annotation,
    Scene,
    SceneConfig,
    annotate,
    sample_scene,
    sample_views,
    scene_rng,
    surface_cloud,
)
from .timing import log_timing

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratedScene:
    views: tuple[tuple[Scene, DepthMap], ...]
    annotation: Annotation
    cloud: SurfaceCloud
    density: int
    labels: Optional[tuple[LabelTensors, ...]] = None


class SceneGenerator:
    def __init__(
        self,
        scene_config: SceneConfig,
        views: int = 5,
        density: int = 6,
        cloud_points: int = 2048,
        geometry: GripperGeometry = GripperGeometry(),
        template: KeypointTemplate = KeypointTemplate(),
        label_spec: Optional[LabelGridSpec] = None,
        normalization: str = "divide",
        depth_noise_std: float = 0.0,
        depth_dropout: float = 0.0,
    ) -> None:
        if views < 1:
            raise ValueError("Need at least one view per scene")
        self._scene_config = scene_config
        self._views = views
        self._density = density
        self._cloud_points = cloud_points
        self._geometry = geometry
        self._template = template
        K = scene_config.intrinsics
        self._label_spec = label_spec or LabelGridSpec(K.width, K.height)
        self._normalization = normalization
        self._depth_noise_std = depth_noise_std
        self._depth_dropout = depth_dropout

    def configured(self, views: Optional[int] = None, density: Optional[int] = None) -> "SceneGenerator":
        """Copy with a different view count or annotation density."""
        return SceneGenerator(
            self._scene_config,
            views if views is not None else self._views,
            density if density is not None else self._density,
            self._cloud_points,
            self._geometry,
            self._template,
            self._label_spec,
            self._normalization,
            self._depth_noise_std,
            self._depth_dropout,
        )

    @property
    def density(self) -> int:
        return self._density

    @property
    def views(self) -> int:
        return self._views

    def labels_for(self, view: Scene, annotation: Annotation) -> LabelTensors:
        encodings = []
        for grasp in annotation.grasps:
            try:
                encodings.append(
                    encode(
                        grasp.transformed(view.camera.extrinsic),
                        view.camera.intrinsics,
                        self._label_spec.bin_spec,
                        self._template,
                        self._normalization,
                    )
                )
            except (BehindCamera, OutOfFrame):
                continue
        return render_labels(encodings, self._label_spec, self._normalization)

    def render(self, view: Scene) -> DepthMap:
        rng = None
        if self._depth_noise_std > 0.0 or self._depth_dropout > 0.0:
            rng = scene_rng(view.seed, view.index, DEPTH_SALT, view.view)
        return render_depth(view, self._depth_noise_std, self._depth_dropout, rng)

    def generate(self, seed: int, index: int, multi: bool, with_labels: bool = False) -> GeneratedScene:
        with log_timing(f"generate scene {index}", logger):
            base = sample_scene(self._scene_config, multi, seed, index)
            cloud = surface_cloud(base, self._cloud_points)
            annotation = annotate(base, self._density, cloud, self._geometry)
            views = tuple((view, self.render(view)) for view in sample_views(base, self._views, self._scene_config))
            labels = tuple(self.labels_for(view, annotation) for view, _ in views) if with_labels else None
        logger.debug("Scene %d: %d grasps over %d views", index, len(annotation.grasps), len(views))
        return GeneratedScene(views, annotation, cloud, self._density, labels)

    def write(
        self,
        store: DatasetStore,
        seed: int,
        index: int,
        multi: bool,
        with_labels: bool = False,
        previews: bool = False,
    ) -> SceneRecord:
        generated = self.generate(seed, index, multi, with_labels)
        return store.write_scene(
            generated.annotation, generated.cloud, generated.views, generated.density, generated.labels, previews
        )


__all__ = ["GeneratedScene", "SceneGenerator"]
