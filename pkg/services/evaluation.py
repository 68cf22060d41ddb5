"""Grasp-set metrics (GSR/GCR/OSR), candidate ranking, and feasibility selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Iterator, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import rotation_errors, translation_errors
from .gripper import Grasp, GripperGeometry, TablePlane, to_gripper_frame
from .scenes.collision import body_hits, enclosed_count, table_violation

logger = logging.getLogger(__name__)

DEFAULT_LEVELS: tuple[tuple[float, float], ...] = ((0.01, 20.0), (0.02, 30.0), (0.03, 45.0))
DEFAULT_PENALTY = 0.05
FEASIBILITY_MIN_POINTS = 10


class NoFeasibleGrasp(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalThresholds:
    """(translation m, rotation degrees) pairs, strictly increasing in both."""

    levels: tuple[tuple[float, float], ...] = DEFAULT_LEVELS

    def __post_init__(self) -> None:
        levels = tuple((float(t), float(r)) for t, r in self.levels)
        if not levels:
            raise ValueError("Need at least one threshold level")
        for (t0, r0), (t1, r1) in zip(levels, levels[1:]):
            if not (t1 > t0 and r1 > r0):
                raise ValueError("Threshold levels must be strictly increasing in both components")
        object.__setattr__(self, "levels", levels)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.levels)

    def __len__(self) -> int:
        return len(self.levels)


def level_label(translation: float, rotation_deg: float) -> str:
    return f"{translation * 100:g}cm_{rotation_deg:g}deg"


@dataclass(frozen=True)
class LevelCounts:
    translation: float
    rotation_deg: float
    matched_predictions: int = 0
    covered_gt: int = 0
    successful_objects: int = 0
    matched_pairs: int = 0
    sum_translation_error: float = 0.0
    sum_rotation_error_deg: float = 0.0

    def __add__(self, other: "LevelCounts") -> "LevelCounts":
        if (self.translation, self.rotation_deg) != (other.translation, other.rotation_deg):
            raise ValueError("Cannot merge counts from different threshold levels")
        return replace(
            self,
            matched_predictions=self.matched_predictions + other.matched_predictions,
            covered_gt=self.covered_gt + other.covered_gt,
            successful_objects=self.successful_objects + other.successful_objects,
            matched_pairs=self.matched_pairs + other.matched_pairs,
            sum_translation_error=self.sum_translation_error + other.sum_translation_error,
            sum_rotation_error_deg=self.sum_rotation_error_deg + other.sum_rotation_error_deg,
        )


def _percent(count: int, total: int) -> float:
    return 100.0 * count / total if total else 0.0


@dataclass(frozen=True)
class MetricsReport:
    """Count-based report; percentages are derived so reports merge by summation."""

    n_predictions: int
    n_gt: int
    n_objects: int
    levels: tuple[LevelCounts, ...]
    failed_recoveries: int = 0
    suppressed: int = 0
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def empty_predictions(self) -> bool:
        return self.n_predictions == 0

    @property
    def empty_gt(self) -> bool:
        return self.n_gt == 0

    def gsr(self, level: int) -> float:
        return _percent(self.levels[level].matched_predictions, self.n_predictions)

    def gcr(self, level: int) -> float:
        return _percent(self.levels[level].covered_gt, self.n_gt)

    def osr(self, level: int) -> float:
        return _percent(self.levels[level].successful_objects, self.n_objects)

    def mean_errors(self, level: int) -> tuple[float, float]:
        counts = self.levels[level]
        if not counts.matched_pairs:
            return (0.0, 0.0)
        return (
            counts.sum_translation_error / counts.matched_pairs,
            counts.sum_rotation_error_deg / counts.matched_pairs,
        )

    def averaged(self) -> tuple[float, float, float]:
        """GSR, GCR, OSR averaged over all threshold levels."""
        n = len(self.levels)
        return (
            sum(self.gsr(i) for i in range(n)) / n,
            sum(self.gcr(i) for i in range(n)) / n,
            sum(self.osr(i) for i in range(n)) / n,
        )

    def merge(self, other: "MetricsReport") -> "MetricsReport":
        if len(self.levels) != len(other.levels):
            raise ValueError("Cannot merge reports with different threshold sets")
        return MetricsReport(
            n_predictions=self.n_predictions + other.n_predictions,
            n_gt=self.n_gt + other.n_gt,
            n_objects=self.n_objects + other.n_objects,
            levels=tuple(a + b for a, b in zip(self.levels, other.levels)),
            failed_recoveries=self.failed_recoveries + other.failed_recoveries,
            suppressed=self.suppressed + other.suppressed,
            meta=dict(self.meta),
        )

    @classmethod
    def empty(cls, thresholds: EvalThresholds = EvalThresholds()) -> "MetricsReport":
        return cls(0, 0, 0, tuple(LevelCounts(t, r) for t, r in thresholds))

    @classmethod
    def merge_all(cls, reports: Iterable["MetricsReport"], thresholds: EvalThresholds = EvalThresholds()) -> "MetricsReport":
        total = cls.empty(thresholds)
        for report in reports:
            total = total.merge(report)
        return total

    def to_json(self) -> dict[str, Any]:
        return {
            "n_predictions": self.n_predictions,
            "n_gt": self.n_gt,
            "n_objects": self.n_objects,
            "failed_recoveries": self.failed_recoveries,
            "suppressed": self.suppressed,
            "empty_predictions": self.empty_predictions,
            "empty_gt": self.empty_gt,
            "meta": self.meta,
            "levels": [
                {
                    "translation": c.translation,
                    "rotation_deg": c.rotation_deg,
                    "matched_predictions": c.matched_predictions,
                    "covered_gt": c.covered_gt,
                    "successful_objects": c.successful_objects,
                    "matched_pairs": c.matched_pairs,
                    "sum_translation_error": c.sum_translation_error,
                    "sum_rotation_error_deg": c.sum_rotation_error_deg,
                    "gsr": self.gsr(i),
                    "gcr": self.gcr(i),
                    "osr": self.osr(i),
                }
                for i, c in enumerate(self.levels)
            ],
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "MetricsReport":
        return cls(
            n_predictions=int(payload["n_predictions"]),
            n_gt=int(payload["n_gt"]),
            n_objects=int(payload["n_objects"]),
            levels=tuple(
                LevelCounts(
                    translation=float(level["translation"]),
                    rotation_deg=float(level["rotation_deg"]),
                    matched_predictions=int(level["matched_predictions"]),
                    covered_gt=int(level["covered_gt"]),
                    successful_objects=int(level["successful_objects"]),
                    matched_pairs=int(level["matched_pairs"]),
                    sum_translation_error=float(level["sum_translation_error"]),
                    sum_rotation_error_deg=float(level["sum_rotation_error_deg"]),
                )
                for level in payload["levels"]
            ),
            failed_recoveries=int(payload.get("failed_recoveries", 0)),
            suppressed=int(payload.get("suppressed", 0)),
            meta=dict(payload.get("meta", {})),
        )

    def csv_rows(self, split: str = "test") -> list[dict[str, Any]]:
        rows = []
        for i, c in enumerate(self.levels):
            mean_t, mean_r = self.mean_errors(i)
            rows.append(
                {
                    "split": split,
                    "threshold": level_label(c.translation, c.rotation_deg),
                    "gsr": self.gsr(i),
                    "gcr": self.gcr(i),
                    "osr": self.osr(i),
                    "n_predictions": self.n_predictions,
                    "n_gt": self.n_gt,
                    "n_objects": self.n_objects,
                    "mean_translation_error_m": mean_t,
                    "mean_rotation_error_deg": mean_r,
                }
            )
        return rows


def pair_errors(pred: Sequence[Grasp], gt: Sequence[Grasp], symmetric: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(n, m) translation errors in meters and rotation errors in radians."""
    if not pred or not gt:
        return np.zeros((len(pred), len(gt))), np.zeros((len(pred), len(gt)))
    pt = np.array([g.pose.t for g in pred])
    gtt = np.array([g.pose.t for g in gt])
    pq = np.array([g.pose.rotation.array for g in pred])
    gq = np.array([g.pose.rotation.array for g in gt])
    return translation_errors(pt[:, None, :], gtt[None, :, :]), rotation_errors(pq[:, None, :], gq[None, :, :], symmetric)


def _one_to_one(match: np.ndarray, te: np.ndarray) -> np.ndarray:
    cost = np.where(match, te, 1e9)
    rows, cols = linear_sum_assignment(cost)
    assigned = np.zeros_like(match)
    keep = match[rows, cols]
    assigned[rows[keep], cols[keep]] = True
    return assigned


def evaluate(
    pred: Sequence[Grasp],
    gt: Sequence[Grasp],
    thresholds: EvalThresholds = EvalThresholds(),
    symmetric: bool = False,
    one_to_one: bool = False,
) -> MetricsReport:
    """Existence-based matching: a pair matches when both error components are within a level."""
    te, re = pair_errors(pred, gt, symmetric)
    object_ids = np.array([g.object_id for g in gt], dtype=np.int64)
    n_objects = len(set(object_ids.tolist()))
    levels = []
    for translation, rotation_deg in thresholds:
        match = (te <= translation) & (re <= math.radians(rotation_deg))
        if one_to_one and match.any():
            match = _one_to_one(match, te)
        covered = match.any(axis=0)
        pairs = np.nonzero(match)
        levels.append(
            LevelCounts(
                translation=translation,
                rotation_deg=rotation_deg,
                matched_predictions=int(np.count_nonzero(match.any(axis=1))),
                covered_gt=int(np.count_nonzero(covered)),
                successful_objects=len(set(object_ids[covered].tolist())),
                matched_pairs=int(len(pairs[0])),
                sum_translation_error=float(te[pairs].sum()),
                sum_rotation_error_deg=float(np.degrees(re[pairs]).sum()),
            )
        )
    report = MetricsReport(len(pred), len(gt), n_objects, tuple(levels))
    if report.empty_predictions or report.empty_gt:
        logger.debug("Evaluating with %d predictions against %d ground-truth grasps", len(pred), len(gt))
    return report


class Combiner(str, Enum):
    LITERAL = "literal"
    PENALIZED = "penalized"


@dataclass(frozen=True)
class Candidate:
    grasp: Grasp
    confidence: float
    reprojection_error: float


@dataclass(frozen=True)
class SelectionScore:
    confidence: float
    reprojection_error: float
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError("Selection score must be finite")


def combine(
    confidence: float,
    reprojection_error: float,
    combiner: Union[Combiner, str] = Combiner.LITERAL,
    penalty: float = DEFAULT_PENALTY,
) -> SelectionScore:
    combiner = Combiner(combiner)
    if combiner is Combiner.LITERAL:
        score = confidence + reprojection_error
    else:
        score = confidence - penalty * reprojection_error
    return SelectionScore(confidence, reprojection_error, score)


def score_and_rank(
    candidates: Sequence[Candidate],
    combiner: Union[Combiner, str] = Combiner.LITERAL,
    penalty: float = DEFAULT_PENALTY,
) -> list[tuple[Candidate, SelectionScore]]:
    """Descending by score; ties keep input order."""
    scored = [(c, combine(c.confidence, c.reprojection_error, combiner, penalty)) for c in candidates]
    return sorted(scored, key=lambda item: -item[1].score)


def feasibility_filter(
    ranked: Sequence[Grasp],
    cloud: np.ndarray,
    table: TablePlane = TablePlane(),
    geometry: GripperGeometry = GripperGeometry(),
    min_points: int = FEASIBILITY_MIN_POINTS,
) -> tuple[int, Grasp]:
    """First grasp (and its rank) that is collision-free and encloses at least `min_points`."""
    points = np.asarray(cloud, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("Feasibility check needs a non-empty point cloud")
    for rank, grasp in enumerate(ranked):
        if table_violation(grasp, table, geometry):
            continue
        local = to_gripper_frame(grasp.pose, points)
        if body_hits(local, grasp.width, geometry):
            continue
        if enclosed_count(local, grasp.width, geometry) >= min_points:
            logger.debug("Selected grasp at rank %d of %d", rank, len(ranked))
            return rank, grasp
    raise NoFeasibleGrasp(f"None of {len(ranked)} ranked grasps is collision-free with enclosed points")


__all__ = [
    "Candidate",
    "Combiner",
    "DEFAULT_LEVELS",
    "EvalThresholds",
    "LevelCounts",
    "MetricsReport",
    "NoFeasibleGrasp",
    "SelectionScore",
    "combine",
    "evaluate",
    "feasibility_filter",
    "level_label",
    "pair_errors",
    "score_and_rank",
]
