"""Per-view grasp recovery pipeline: encode, label, simulate, decode, PnP, rescale, evaluate."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .detector_sim import Detection, NoDepthReturn, NoiseConfig, ScaleSource, resolve_scale, simulate_detections
from .evaluation import EvalThresholds, MetricsReport, evaluate
from .geometry import CameraIntrinsics, NonPositiveDepth
from .gripper import (
    BehindCamera,
    BinSpec,
    DegenerateTranslation,
    Grasp,
    GraspEncoding,
    KeypointTemplate,
    OutOfFrame,
    decode_keypoints,
    encode,
    refine_scale,
)
from .labels import LabelGridSpec, decode_peaks, render_labels
from .pnp import BehindCameraSolution, DegenerateConfiguration, solve_planar_pnp
from .scenes.render import DepthMap, render_depth
from .scenes.sampling import Scene
from .timing import log_timing

logger = logging.getLogger(__name__)

RECOVERY_ERRORS = (
    BehindCameraSolution,
    DegenerateConfiguration,
    DegenerateTranslation,
    NoDepthReturn,
    NonPositiveDepth,
)


@dataclass(frozen=True)
class ViewCase:
    """One rendered view with the world-frame annotations of its scene."""

    view: Scene
    grasps: tuple[Grasp, ...]
    depth: Optional[DepthMap] = None


@dataclass(frozen=True)
class GroundTruth:
    encodings: tuple[GraspEncoding, ...]
    grasps: tuple[Grasp, ...]
    suppressed: int = 0
    out_of_view: int = 0


@dataclass(frozen=True)
class Recovery:
    detection: Detection
    grasp: Grasp
    reprojection_error: float


@dataclass(frozen=True)
class ViewResult:
    report: MetricsReport
    ground_truth: GroundTruth
    detections: tuple[Detection, ...]
    recoveries: tuple[Recovery, ...]


class GraspPipeline:
    def __init__(
        self,
        intrinsics: CameraIntrinsics,
        template: KeypointTemplate = KeypointTemplate(),
        label_spec: Optional[LabelGridSpec] = None,
        thresholds: EvalThresholds = EvalThresholds(),
        normalization: str = "divide",
        peak_threshold: float = 0.3,
        use_labels: bool = True,
        symmetric: bool = False,
    ) -> None:
        self._K = intrinsics
        self._template = template
        self._label_spec = label_spec or LabelGridSpec(intrinsics.width, intrinsics.height)
        self._thresholds = thresholds
        self._normalization = normalization
        self._peak_threshold = peak_threshold
        self._use_labels = use_labels
        self._symmetric = symmetric

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return self._K

    @property
    def template(self) -> KeypointTemplate:
        return self._template

    @property
    def bins(self) -> BinSpec:
        return self._label_spec.bin_spec

    @property
    def label_spec(self) -> LabelGridSpec:
        return self._label_spec

    @property
    def thresholds(self) -> EvalThresholds:
        return self._thresholds

    def ground_truth(self, grasps: Sequence[Grasp]) -> GroundTruth:
        """Encodes camera-frame grasps; with labels, keeps what survives the label round trip."""
        encodings: list[GraspEncoding] = []
        kept: list[Grasp] = []
        out_of_view = 0
        for grasp in grasps:
            try:
                encodings.append(encode(grasp, self._K, self.bins, self._template, self._normalization))
            except (BehindCamera, OutOfFrame):
                out_of_view += 1
                continue
            kept.append(grasp)
        if not self._use_labels:
            return GroundTruth(tuple(encodings), tuple(kept), 0, out_of_view)

        tensors = render_labels(encodings, self._label_spec, self._normalization)
        decoded = decode_peaks(
            tensors.heatmap, tensors, self._label_spec, self._peak_threshold, max(1, len(tensors.centers))
        )
        source = {(c.row, c.col, c.bin): c.source for c in tensors.centers}
        grasps_out = [kept[source[(*self._label_spec.cell_of(enc.center), enc.bin)]] for enc in decoded]
        return GroundTruth(tuple(decoded), tuple(grasps_out), tensors.suppressed, out_of_view)

    def recover(
        self,
        detection: Detection,
        scale_source: Union[ScaleSource, str] = ScaleSource.PREDICTED,
        depth: Optional[DepthMap] = None,
    ) -> Recovery:
        enc = detection.encoding
        result = solve_planar_pnp(decode_keypoints(enc), self._template, self._K)
        scale = resolve_scale(enc, scale_source, result, depth, self._K, self._template)
        pose = refine_scale(result.best, scale)
        return Recovery(detection, Grasp(pose, enc.width), result.reprojection_errors[0])

    def recover_all(
        self,
        detections: Sequence[Detection],
        scale_source: Union[ScaleSource, str] = ScaleSource.PREDICTED,
        depth: Optional[DepthMap] = None,
    ) -> tuple[list[Recovery], int]:
        recoveries: list[Recovery] = []
        failed = 0
        for detection in detections:
            try:
                recoveries.append(self.recover(detection, scale_source, depth))
            except RECOVERY_ERRORS as exc:
                failed += 1
                logger.debug("Dropped detection %s: %s", detection.provenance, exc)
        return recoveries, failed

    def process_view(
        self,
        view: Scene,
        grasps: Sequence[Grasp],
        noise: NoiseConfig,
        scale_source: Union[ScaleSource, str] = ScaleSource.PREDICTED,
        depth: Optional[DepthMap] = None,
    ) -> ViewResult:
        """Runs one (scene, view) through the pipeline; `grasps` are world-frame annotations."""
        scale_source = ScaleSource(scale_source)
        with log_timing(f"pipeline scene {view.index} view {view.view}", logger, logging.DEBUG):
            extrinsic = view.camera.extrinsic
            truth = self.ground_truth([g.transformed(extrinsic) for g in grasps])
            detections = simulate_detections(
                truth.encodings, noise, self._K, self._template, self.bins, stream=(view.index, view.view)
            )
            if scale_source is ScaleSource.CENTER_DEPTH and depth is None:
                depth = render_depth(view)
            recoveries, failed = self.recover_all(detections, scale_source, depth)
            report = evaluate(
                [r.grasp for r in recoveries], truth.grasps, self._thresholds, symmetric=self._symmetric
            )
            report = replace(report, failed_recoveries=failed, suppressed=truth.suppressed)
        return ViewResult(report, truth, tuple(detections), tuple(recoveries))

    def process_cases(
        self,
        cases: Sequence[ViewCase],
        noise: NoiseConfig,
        scale_source: Union[ScaleSource, str] = ScaleSource.PREDICTED,
        threads: int = 1,
    ) -> list[ViewResult]:
        """Results in case order regardless of the worker count."""

        def run(case: ViewCase) -> ViewResult:
            return self.process_view(case.view, case.grasps, noise, scale_source, case.depth)

        if threads <= 1:
            return [run(case) for case in cases]
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(run, cases))


__all__ = ["GraspPipeline", "GroundTruth", "RECOVERY_ERRORS", "Recovery", "ViewCase", "ViewResult"]
