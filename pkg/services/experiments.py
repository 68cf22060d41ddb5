"""Monte-Carlo sweeps: PnP error versus camera distance, and the scale/offset ablation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np

from .detector_sim import NoiseConfig, ScaleSource
from .evaluation import MetricsReport
from .geometry import CameraIntrinsics, Pose, Rotation, project_points, rotation_error, translation_error
from .gripper import KeypointSet, KeypointTemplate, refine_scale
from .pnp import BehindCameraSolution, DegenerateConfiguration, solve_planar_pnp
from .pipeline import GraspPipeline, ViewCase

logger = logging.getLogger(__name__)

MAX_NORMAL_TILT = math.radians(60.0)
MIN_ABLATION_SCENES = 30
SWEEP_COLUMNS = ("distance", "sigma", "mean_rot_err_deg", "mean_trans_err_m")
ABLATION_COLUMNS = ("method", "scale_source", "keypoints", "scale_branch", "normalized_keypoints", "GSR", "GCR", "OSR")


@dataclass(frozen=True)
class SweepRow:
    distance: float
    sigma: float
    mean_rot_err_deg: float
    mean_trans_err_m: float
    failures: int = 0

    def to_row(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in SWEEP_COLUMNS}


def parse_range(spec: str) -> list[float]:
    """Either lo:hi:n (n evenly spaced values) or a comma-separated list."""
    if ":" in spec:
        lo, hi, n = spec.split(":")
        count = int(n)
        if count < 1:
            raise ValueError(f"Range {spec!r} needs at least one point")
        return [float(v) for v in np.linspace(float(lo), float(hi), count)]
    return [float(v) for v in spec.split(",") if v.strip()]


def _facing_rotation(rng: np.random.Generator) -> Rotation:
    # The template plane normal is the gripper y axis; keep it within the tilt limit of the optical axis.
    while True:
        rotation = Rotation.random(rng)
        normal = rotation.matrix[:, 1]
        if abs(float(normal[2])) >= math.cos(MAX_NORMAL_TILT):
            return rotation


def distance_sweep(
    distances: Sequence[float],
    sigmas: Sequence[float],
    trials: int,
    seed: int,
    intrinsics: CameraIntrinsics,
    template: KeypointTemplate = KeypointTemplate(),
    threads: int = 1,
) -> list[SweepRow]:
    """Mean pose error of noisy-keypoint PnP per (distance, sigma), common random numbers throughout."""
    if len(distances) < 2:
        raise ValueError("The distance sweep needs at least two distances")
    if trials < 1:
        raise ValueError("Need at least one trial per cell")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    rotations = [_facing_rotation(rng) for _ in range(trials)]
    noise = rng.standard_normal((trials, 4, 2))

    def cell(distance: float, sigma: float) -> SweepRow:
        rot_errors: list[float] = []
        trans_errors: list[float] = []
        failures = 0
        for rotation, eps in zip(rotations, noise):
            pose = Pose(rotation, (0.0, 0.0, float(distance)))
            clean = project_points(template.world_points(pose), intrinsics)
            try:
                result = solve_planar_pnp(KeypointSet.from_array(clean + sigma * eps), template, intrinsics)
            except (DegenerateConfiguration, BehindCameraSolution):
                failures += 1
                continue
            estimate = refine_scale(result.best, float(distance))
            rot_errors.append(math.degrees(rotation_error(estimate.rotation, rotation)))
            trans_errors.append(translation_error(estimate.t, pose.t))
        if not rot_errors:
            return SweepRow(float(distance), float(sigma), math.nan, math.nan, failures)
        return SweepRow(
            float(distance), float(sigma), float(np.mean(rot_errors)), float(np.mean(trans_errors)), failures
        )

    grid = [(d, s) for s in sigmas for d in distances]
    if threads <= 1:
        rows = [cell(d, s) for d, s in grid]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            rows = list(executor.map(lambda item: cell(*item), grid))
    failed = sum(r.failures for r in rows)
    if failed:
        logger.warning("PnP failed on %d of %d noisy trials", failed, len(grid) * trials)
    return rows


@dataclass(frozen=True)
class AblationRow:
    method: str
    scale_source: ScaleSource
    normalized: bool
    report: MetricsReport

    @property
    def averages(self) -> tuple[float, float, float]:
        return self.report.averaged()

    def to_row(self) -> dict[str, Any]:
        gsr, gcr, osr = self.averages
        return {
            "method": self.method,
            "scale_source": self.scale_source.value,
            "keypoints": "normalized" if self.normalized else "raw",
            "scale_branch": int(self.scale_source is ScaleSource.PREDICTED),
            "normalized_keypoints": int(self.normalized),
            "GSR": gsr,
            "GCR": gcr,
            "OSR": osr,
        }


ABLATION_SETTINGS: tuple[tuple[str, ScaleSource, bool], ...] = (
    ("keypoint_scale", ScaleSource.KEYPOINT_PROXIMITY, False),
    ("scale_branch", ScaleSource.PREDICTED, False),
    ("scale_branch_normalized", ScaleSource.PREDICTED, True),
)


def ablation_noise(noise: NoiseConfig, normalized: bool) -> NoiseConfig:
    """Same offset sigma applied to raw or to normalized offsets, all other draws shared."""
    sigma = noise.offset_sigma
    if normalized:
        return replace(noise, sigma_offset=sigma, sigma_raw=None)
    return replace(noise, sigma_offset=None, sigma_raw=sigma)


def ablation_run(
    pipeline: GraspPipeline,
    cases: Sequence[ViewCase],
    noise: NoiseConfig,
    threads: int = 1,
    scenes: Optional[int] = None,
) -> list[AblationRow]:
    """Three rows: keypoint-proximity scale, predicted scale, predicted scale with normalized offsets."""
    n_scenes = scenes if scenes is not None else len({case.view.index for case in cases})
    if n_scenes < MIN_ABLATION_SCENES:
        logger.warning("Ablation over %d scenes; %d or more are recommended", n_scenes, MIN_ABLATION_SCENES)
    rows = []
    for method, source, normalized in ABLATION_SETTINGS:
        results = pipeline.process_cases(cases, ablation_noise(noise, normalized), source, threads)
        report = MetricsReport.merge_all((r.report for r in results), pipeline.thresholds)
        rows.append(AblationRow(method, source, normalized, report))
        gsr, gcr, osr = report.averaged()
        logger.info("Ablation %s: GSR %.1f GCR %.1f OSR %.1f", method, gsr, gcr, osr)
    return rows


__all__ = [
    "ABLATION_COLUMNS",
    "ABLATION_SETTINGS",
    "AblationRow",
    "SWEEP_COLUMNS",
    "SweepRow",
    "ablation_noise",
    "ablation_run",
    "distance_sweep",
    "parse_range",
]
