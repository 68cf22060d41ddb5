"""Ground-truth label tensors on the downsampled grid, training losses, and peak decoding."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.ndimage import maximum_filter

from .geometry import PixelPoint
from .gripper import NORMALIZATIONS, BinSpec, GraspEncoding, normalize_offsets

logger = logging.getLogger(__name__)

FOCAL_ALPHA = 2.0
FOCAL_BETA = 4.0
PRED_CLAMP = 1e-7
MIN_SIGMA_CELLS = 2.0
SIGMA_PER_TIP_GAP = 0.25
TRUNCATE_SIGMAS = 3.0


class EmptyMask(ValueError):
    pass


@dataclass(frozen=True)
class LabelGridSpec:
    width: int = 512
    height: int = 512
    downsample: int = 4
    bins: int = 9

    def __post_init__(self) -> None:
        if self.downsample < 1:
            raise ValueError("Downsample ratio must be at least 1")
        if self.width % self.downsample or self.height % self.downsample:
            raise ValueError(
                f"Image size {self.width}x{self.height} is not divisible by downsample {self.downsample}"
            )
        if self.bins < 1:
            raise ValueError("Need at least one orientation bin")

    @property
    def grid_width(self) -> int:
        return self.width // self.downsample

    @property
    def grid_height(self) -> int:
        return self.height // self.downsample

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.grid_height, self.grid_width, self.bins)

    @property
    def bin_spec(self) -> BinSpec:
        return BinSpec(self.bins)

    def cell_of(self, center: PixelPoint) -> tuple[int, int]:
        if not (0.0 <= center.u < self.width and 0.0 <= center.v < self.height):
            raise ValueError(f"Center ({center.u:.2f}, {center.v:.2f}) lies outside the image")
        return int(center.v // self.downsample), int(center.u // self.downsample)

    def cell_center(self, row: int, col: int) -> PixelPoint:
        return PixelPoint((col + 0.5) * self.downsample, (row + 0.5) * self.downsample)


@dataclass(frozen=True)
class LabeledCenter:
    row: int
    col: int
    bin: int
    residual: tuple[float, float]
    source: int


@dataclass(frozen=True, eq=False)
class LabelTensors:
    """Heatmap (H', W', M), offsets (H', W', M, 8), width and scale maps (H', W', M)."""

    heatmap: np.ndarray
    offsets: np.ndarray
    width: np.ndarray
    scale: np.ndarray
    centers: tuple[LabeledCenter, ...] = ()
    suppressed: int = 0
    normalization: str = "divide"

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.heatmap.shape, dtype=bool)
        for c in self.centers:
            mask[c.row, c.col, c.bin] = True
        return mask

    @property
    def fields(self) -> dict[str, np.ndarray]:
        return {"heatmap": self.heatmap, "offsets": self.offsets, "width": self.width, "scale": self.scale}


@dataclass(frozen=True)
class LossWeights:
    heatmap: float = 1.0
    offsets: float = 1.0
    width: float = 10.0
    scale: float = 10.0

    def __post_init__(self) -> None:
        if min(self.heatmap, self.offsets, self.width, self.scale) < 0:
            raise ValueError("Loss weights must be non-negative")


@dataclass(frozen=True)
class LossParts:
    heatmap: float
    offsets: float
    width: float
    scale: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.heatmap, self.offsets, self.width, self.scale)


def splat_sigma(tip_gap_px: float, downsample: int) -> float:
    return max(MIN_SIGMA_CELLS, SIGMA_PER_TIP_GAP * tip_gap_px / downsample)


def _splat(channel: np.ndarray, row: int, col: int, sigma: float) -> None:
    radius = int(math.ceil(TRUNCATE_SIGMAS * sigma))
    h, w = channel.shape
    r0, r1 = max(0, row - radius), min(h, row + radius + 1)
    c0, c1 = max(0, col - radius), min(w, col + radius + 1)
    rr = np.arange(r0, r1)[:, None] - row
    cc = np.arange(c0, c1)[None, :] - col
    peak = np.exp(-(rr * rr + cc * cc) / (2.0 * sigma * sigma))
    np.maximum(channel[r0:r1, c0:c1], peak, out=channel[r0:r1, c0:c1])


def render_labels(
    encodings: Sequence[GraspEncoding],
    spec: LabelGridSpec = LabelGridSpec(),
    normalization: Optional[str] = None,
) -> LabelTensors:
    """Rasterizes encodings; a repeated (cell, bin) keeps the first encoding."""
    if normalization is None:
        normalization = encodings[0].normalization if encodings else "divide"
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"Unknown offset normalization {normalization!r}")
    heatmap = np.zeros(spec.shape)
    offsets = np.zeros(spec.shape + (8,))
    width = np.zeros(spec.shape)
    scale = np.zeros(spec.shape)
    taken: set[tuple[int, int, int]] = set()
    centers: list[LabeledCenter] = []
    suppressed = 0

    for index, enc in enumerate(encodings):
        if enc.normalization != normalization:
            raise ValueError("All encodings in one label image must share a normalization")
        if not 0 <= enc.bin < spec.bins:
            raise ValueError(f"Bin {enc.bin} outside [0, {spec.bins})")
        row, col = spec.cell_of(enc.center)
        key = (row, col, enc.bin)
        if key in taken:
            suppressed += 1
            continue
        taken.add(key)
        cell = spec.cell_center(row, col)
        residual = enc.center.array - cell.array
        raw = enc.raw_offsets()
        # Residual folds into the offsets so cell center + offsets still lands on the keypoints.
        offsets[row, col, enc.bin] = normalize_offsets(raw + residual, enc.scale, normalization).reshape(8)
        width[row, col, enc.bin] = enc.width
        scale[row, col, enc.bin] = enc.scale
        tip_gap = float(np.linalg.norm(raw[1] - raw[0]))
        _splat(heatmap[:, :, enc.bin], row, col, splat_sigma(tip_gap, spec.downsample))
        centers.append(LabeledCenter(row, col, enc.bin, (float(residual[0]), float(residual[1])), index))

    for c in centers:
        heatmap[c.row, c.col, c.bin] = 1.0
    if suppressed:
        logger.debug("Label rendering suppressed %d of %d encodings", suppressed, len(encodings))
    return LabelTensors(heatmap, offsets, width, scale, tuple(centers), suppressed, normalization)


def clamp_probabilities(pred: np.ndarray, eps: float = PRED_CLAMP) -> np.ndarray:
    return np.clip(pred, eps, 1.0 - eps)


def focal_loss(pred: np.ndarray, gt: np.ndarray, alpha: float = FOCAL_ALPHA, beta: float = FOCAL_BETA) -> float:
    """Penalty-reduced focal loss, normalized by the number of peak cells (at least 1)."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"Shape mismatch {pred.shape} vs {gt.shape}")
    positive = gt >= 1.0
    n = max(1, int(np.count_nonzero(positive)))
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(positive, (1.0 - pred) ** alpha * np.log(pred), 0.0)
        neg = np.where(positive, 0.0, (1.0 - gt) ** beta * pred**alpha * np.log1p(-pred))
    return float(-(pos.sum() + neg.sum()) / n)


def focal_loss_grad(
    pred: np.ndarray, gt: np.ndarray, alpha: float = FOCAL_ALPHA, beta: float = FOCAL_BETA
) -> np.ndarray:
    """Analytic d(focal_loss)/d(pred), elementwise."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    positive = gt >= 1.0
    n = max(1, int(np.count_nonzero(positive)))
    with np.errstate(divide="ignore", invalid="ignore"):
        d_pos = -alpha * (1.0 - pred) ** (alpha - 1.0) * np.log(pred) + (1.0 - pred) ** alpha / pred
        d_neg = (1.0 - gt) ** beta * (
            alpha * pred ** (alpha - 1.0) * np.log1p(-pred) - pred**alpha / (1.0 - pred)
        )
    return -np.where(positive, d_pos, d_neg) / n


def masked_l1(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"Shape mismatch {pred.shape} vs {gt.shape}")
    mask = np.asarray(mask, dtype=bool)
    while mask.ndim < pred.ndim:
        mask = mask[..., None]
    mask = np.broadcast_to(mask, pred.shape)
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise EmptyMask("No labeled entries under the mask")
    return float(np.abs(pred - gt)[mask].sum() / count)


def total_loss(
    parts: Union[LossParts, Sequence[float]], weights: LossWeights = LossWeights()
) -> float:
    values = parts.as_tuple() if isinstance(parts, LossParts) else tuple(float(p) for p in parts)
    if len(values) != 4:
        raise ValueError("Expected four loss parts")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("Loss parts must be finite")
    heat, off, wid, sca = values
    return weights.heatmap * heat + weights.offsets * off + weights.width * wid + weights.scale * sca


def compute_losses(pred: LabelTensors, gt: LabelTensors) -> LossParts:
    mask = gt.mask
    return LossParts(
        heatmap=focal_loss(clamp_probabilities(pred.heatmap), gt.heatmap),
        offsets=masked_l1(pred.offsets, gt.offsets, mask),
        width=masked_l1(pred.width, gt.width, mask),
        scale=masked_l1(pred.scale, gt.scale, mask),
    )


def decode_peaks(
    heatmap: np.ndarray,
    tensors: LabelTensors,
    spec: LabelGridSpec = LabelGridSpec(),
    threshold: float = 0.3,
    top_k: int = 100,
) -> list[GraspEncoding]:
    """Encodings at 3x3 local maxima of each channel, strongest first."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"Peak threshold must be in [0, 1], got {threshold!r}")
    heatmap = np.asarray(heatmap, dtype=float)
    pooled = maximum_filter(heatmap, size=(3, 3, 1), mode="constant", cval=0.0)
    peaks = (heatmap == pooled) & (heatmap >= threshold) & (heatmap > 0.0)

    channel, row, col = np.nonzero(np.transpose(peaks, (2, 0, 1)))
    values = heatmap[row, col, channel]
    order = np.argsort(-values, kind="stable")

    out: list[GraspEncoding] = []
    for i in order:
        if len(out) >= top_k:
            break
        r, c, m = int(row[i]), int(col[i]), int(channel[i])
        scale = float(tensors.scale[r, c, m])
        width = float(tensors.width[r, c, m])
        if scale <= 0.0 or width <= 0.0:
            continue
        out.append(
            GraspEncoding(
                center=spec.cell_center(r, c),
                bin=m,
                offsets=tuple(map(tuple, tensors.offsets[r, c, m].reshape(4, 2))),
                scale=scale,
                width=width,
                confidence=float(min(1.0, values[i])),
                normalization=tensors.normalization,
            )
        )
    return out


__all__ = [
    "EmptyMask",
    "LabelGridSpec",
    "LabelTensors",
    "LabeledCenter",
    "LossParts",
    "LossWeights",
    "clamp_probabilities",
    "compute_losses",
    "decode_peaks",
    "focal_loss",
    "focal_loss_grad",
    "masked_l1",
    "render_labels",
    "splat_sigma",
]
