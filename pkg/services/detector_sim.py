"""Detection simulator: perturbs ground-truth encodings under configurable noise regimes.

Stands in for a trained keypoint network. Noise is drawn per ground-truth grasp
in a fixed order so that configurations sharing a seed see the same draws.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Any, Optional, Sequence, Union

import numpy as np

from .geometry import CameraIntrinsics, PixelPoint, Pose, Rotation
from .gripper import (
    BehindCamera,
    BinSpec,
    Grasp,
    GraspEncoding,
    KeypointTemplate,
    OutOfFrame,
    denormalize_offsets,
    encode,
    normalize_offsets,
)
from .pnp import PnPResult
from .scenes.render import DepthMap

logger = logging.getLogger(__name__)

CONFIDENCE_TAU_PX = 3.0
MIN_SCALE = 1e-6
MIN_WIDTH = 1e-4
FP_SCALE_RANGE = (0.3, 2.0)
FP_WIDTH_RANGE = (0.02, 0.10)
FP_MAX_TRIES = 100


class NoDepthReturn(RuntimeError):
    pass


class ScaleSource(str, Enum):
    PREDICTED = "PredictedScale"
    KEYPOINT_PROXIMITY = "KeypointProximity"
    CENTER_DEPTH = "CenterDepth"


@dataclass(frozen=True)
class NoiseConfig:
    """Offset noise is either on normalized offsets (sigma_offset) or raw pixels (sigma_raw)."""

    sigma_offset: Optional[float] = None
    sigma_raw: Optional[float] = 0.0
    shrink: float = 1.0
    sigma_center: float = 0.0
    sigma_scale_rel: float = 0.0
    sigma_width: float = 0.0
    drop_rate: float = 0.0
    false_positive_rate: float = 0.0
    seed: int = 0
    grid_ratio: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.sigma_offset is None) == (self.sigma_raw is None):
            raise ValueError("Exactly one of sigma_offset and sigma_raw must be set")
        sigmas = [self.sigma_center, self.sigma_scale_rel, self.sigma_width]
        sigmas.append(self.sigma_offset if self.sigma_offset is not None else self.sigma_raw)
        if any(s < 0 for s in sigmas):
            raise ValueError("Noise standard deviations must be non-negative")
        if not 0.0 < self.shrink <= 1.0:
            raise ValueError(f"shrink must be in (0, 1], got {self.shrink!r}")
        if not (0.0 <= self.drop_rate < 1.0 and 0.0 <= self.false_positive_rate < 1.0):
            raise ValueError("drop_rate and false_positive_rate must be in [0, 1)")
        if self.grid_ratio is not None and self.grid_ratio < 1:
            raise ValueError("grid_ratio must be a positive integer")

    @property
    def normalized(self) -> bool:
        return self.sigma_offset is not None

    @property
    def offset_sigma(self) -> float:
        return float(self.sigma_offset if self.sigma_offset is not None else self.sigma_raw)

    def with_seed(self, seed: int) -> "NoiseConfig":
        return replace(self, seed=int(seed))

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "NoiseConfig":
        known = {k: payload[k] for k in cls.__dataclass_fields__ if k in payload}
        if "sigma_offset" in known and known["sigma_offset"] is not None and "sigma_raw" not in known:
            known["sigma_raw"] = None
        return cls(**known)


NOISE_PRESETS: dict[str, NoiseConfig] = {
    "clean": NoiseConfig(),
    "in_domain": NoiseConfig(
        sigma_raw=1.0, sigma_center=0.5, sigma_scale_rel=0.02, sigma_width=0.002, drop_rate=0.05, false_positive_rate=0.05
    ),
    "domain_shift": NoiseConfig(
        shrink=0.85, sigma_raw=2.0, sigma_scale_rel=0.05, drop_rate=0.1, false_positive_rate=0.1
    ),
    "close_keypoints": NoiseConfig(shrink=0.8),
}


def load_noise(spec: str) -> NoiseConfig:
    """Preset name or path to a JSON file of NoiseConfig fields."""
    if spec in NOISE_PRESETS:
        return NOISE_PRESETS[spec]
    with open(spec, "r", encoding="utf-8") as handle:
        return NoiseConfig.from_json(json.load(handle))


@dataclass(frozen=True)
class Detection:
    encoding: GraspEncoding
    provenance: Union[int, str]

    @property
    def is_false_positive(self) -> bool:
        return self.provenance == "fp"

    def to_json(self) -> dict[str, Any]:
        payload = self.encoding.to_json()
        payload["provenance"] = self.provenance
        return payload

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "Detection":
        provenance = payload.get("provenance", "fp")
        return cls(GraspEncoding.from_json(payload), provenance if provenance == "fp" else int(provenance))


def _rms(displacement: np.ndarray) -> float:
    return float(math.sqrt(np.mean(np.sum(displacement * displacement, axis=1))))


def confidence_for(rms_px: float, tau: float = CONFIDENCE_TAU_PX) -> float:
    return float(math.exp(-(rms_px * rms_px) / (2.0 * tau * tau)))


def _quantize(center: np.ndarray, ratio: int, K: CameraIntrinsics) -> np.ndarray:
    cols = min(int(center[0] // ratio), K.width // ratio - 1)
    rows = min(int(center[1] // ratio), K.height // ratio - 1)
    return np.array([(cols + 0.5) * ratio, (rows + 0.5) * ratio])


def _perturb(
    enc: GraspEncoding,
    noise: NoiseConfig,
    K: CameraIntrinsics,
    eps_off: np.ndarray,
    eps_center: np.ndarray,
    eps_scale: float,
    eps_width: float,
) -> GraspEncoding:
    raw = enc.raw_offsets()
    shrunk = noise.shrink * raw
    sigma = noise.offset_sigma
    if noise.normalized:
        noisy_norm = normalize_offsets(shrunk, enc.scale, enc.normalization) + sigma * eps_off
        noisy = denormalize_offsets(noisy_norm, enc.scale, enc.normalization)
    else:
        noisy = shrunk + sigma * eps_off
    confidence = confidence_for(_rms(noisy - shrunk))

    moved = False
    center = enc.center.array + noise.sigma_center * eps_center
    center = np.clip(center, 0.0, [np.nextafter(K.width, 0.0), np.nextafter(K.height, 0.0)])
    if noise.grid_ratio is not None:
        quantized = _quantize(center, noise.grid_ratio, K)
        moved = not np.array_equal(quantized, center)
        noisy = noisy + (center - quantized)
        center = quantized

    scale = max(MIN_SCALE, enc.scale * (1.0 + noise.sigma_scale_rel * eps_scale))
    width = max(MIN_WIDTH, enc.width + noise.sigma_width * eps_width)

    if noise.shrink == 1.0 and sigma == 0.0 and not moved and scale == enc.scale:
        offsets = enc.offsets
    else:
        offsets = tuple(map(tuple, normalize_offsets(noisy, scale, enc.normalization)))
    return GraspEncoding(
        center=enc.center if np.array_equal(center, enc.center.array) else PixelPoint(float(center[0]), float(center[1])),
        bin=enc.bin,
        offsets=offsets,
        scale=scale,
        width=width,
        confidence=confidence,
        normalization=enc.normalization,
    )


def _false_positive(
    rng: np.random.Generator,
    K: CameraIntrinsics,
    template: KeypointTemplate,
    bins: BinSpec,
    normalization: str,
) -> Optional[GraspEncoding]:
    for _ in range(FP_MAX_TRIES):
        u = rng.uniform(0.0, K.width)
        v = rng.uniform(0.0, K.height)
        ray = K.inverse_matrix @ np.array([u, v, 1.0])
        distance = rng.uniform(*FP_SCALE_RANGE)
        rotation = Rotation.random(rng)
        width = rng.uniform(*FP_WIDTH_RANGE)
        confidence = rng.random()
        grasp = Grasp(Pose(rotation, tuple(distance * ray / np.linalg.norm(ray))), float(width))
        try:
            enc = encode(grasp, K, bins, template, normalization)
        except (BehindCamera, OutOfFrame):
            continue
        return replace(enc, confidence=float(confidence))
    return None


def simulate_detections(
    gt: Sequence[GraspEncoding],
    noise: NoiseConfig,
    K: CameraIntrinsics,
    template: KeypointTemplate = KeypointTemplate(),
    bins: BinSpec = BinSpec(),
    stream: Sequence[int] = (),
) -> list[Detection]:
    """Noisy copies of `gt` (minus drops) followed by injected false positives.

    `stream` separates independent draws for different views under one seed.
    """
    root = np.random.SeedSequence([int(noise.seed), *map(int, stream)])
    gt_seq, fp_seq = root.spawn(2)
    rng = np.random.default_rng(gt_seq)

    detections: list[Detection] = []
    for index, enc in enumerate(gt):
        u_drop = rng.random()
        eps_off = rng.standard_normal((4, 2))
        eps_center = rng.standard_normal(2)
        eps_scale = float(rng.standard_normal())
        eps_width = float(rng.standard_normal())
        if u_drop < noise.drop_rate:
            continue
        detections.append(Detection(_perturb(enc, noise, K, eps_off, eps_center, eps_scale, eps_width), index))

    n_fp = int(round(noise.false_positive_rate * len(gt)))
    if n_fp:
        fp_rng = np.random.default_rng(fp_seq)
        normalization = gt[0].normalization if gt else "divide"
        for _ in range(n_fp):
            enc = _false_positive(fp_rng, K, template, bins, normalization)
            if enc is not None:
                detections.append(Detection(enc, "fp"))
    logger.debug("Simulated %d detections from %d ground-truth encodings", len(detections), len(gt))
    return detections


def bilinear_depth(depth: DepthMap, pixel: PixelPoint) -> float:
    """Bilinear z-depth at a sub-pixel location; any contributing zero is a missing return."""
    h, w = depth.depth.shape
    u = min(max(pixel.u, 0.0), w - 1.0)
    v = min(max(pixel.v, 0.0), h - 1.0)
    u0, v0 = min(int(u), w - 2), min(int(v), h - 2)
    du, dv = u - u0, v - v0
    value = 0.0
    for (r, c), weight in (
        ((v0, u0), (1.0 - du) * (1.0 - dv)),
        ((v0, u0 + 1), du * (1.0 - dv)),
        ((v0 + 1, u0), (1.0 - du) * dv),
        ((v0 + 1, u0 + 1), du * dv),
    ):
        if weight <= 0.0:
            continue
        z = float(depth.depth[min(r, h - 1), min(c, w - 1)])
        if z <= 0.0:
            raise NoDepthReturn(f"No depth return near pixel ({pixel.u:.1f}, {pixel.v:.1f})")
        value += weight * z
    return value


def resolve_scale(
    pred: GraspEncoding,
    source: Union[ScaleSource, str],
    pnp: Optional[PnPResult] = None,
    depth: Optional[DepthMap] = None,
    K: Optional[CameraIntrinsics] = None,
    template: KeypointTemplate = KeypointTemplate(),
) -> float:
    """Translation magnitude in meters from the chosen source."""
    source = ScaleSource(source)
    if source is ScaleSource.PREDICTED:
        return pred.scale
    if source is ScaleSource.KEYPOINT_PROXIMITY:
        if pnp is None:
            raise ValueError("KeypointProximity needs a PnP result")
        return template.side * float(np.linalg.norm(pnp.best.t))
    if depth is None or K is None:
        raise ValueError("CenterDepth needs a depth map and intrinsics")
    z = bilinear_depth(depth, pred.center)
    ray = K.inverse_matrix @ np.array([pred.center.u, pred.center.v, 1.0])
    return z * float(np.linalg.norm(ray))


__all__ = [
    "Detection",
    "NOISE_PRESETS",
    "NoDepthReturn",
    "NoiseConfig",
    "ScaleSource",
    "bilinear_depth",
    "confidence_for",
    "load_noise",
    "resolve_scale",
    "simulate_detections",
]
