"""Gripper keypoint template, grasp encoding/decoding, and gripper box geometry.

Gripper frame: origin at the midpoint between the fingertips, x along the
closing line (tip-left at -x), z pointing from the tips back towards the palm.
The gripper approaches its object along -z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from .geometry import (
    MIN_DEPTH,
    CameraIntrinsics,
    PixelPoint,
    Pose,
    project,
    project_points,
)

Normalization = Literal["divide", "multiply"]
NORMALIZATIONS: tuple[str, ...] = ("divide", "multiply")

KEYPOINT_NAMES = ("tip_left", "tip_right", "back_left", "back_right")
UNIT_SQUARE = (
    (-0.5, 0.0, 0.0),
    (0.5, 0.0, 0.0),
    (-0.5, 0.0, 1.0),
    (0.5, 0.0, 1.0),
)
MIN_TRANSLATION_NORM = 1e-9


class BehindCamera(ValueError):
    pass


class OutOfFrame(ValueError):
    pass


class DegenerateTranslation(ValueError):
    pass


@dataclass(frozen=True)
class KeypointTemplate:
    """Four coplanar points in the gripper x-z plane, canonical units.

    `side` is the physical length in meters of one canonical unit; it places the
    virtual keypoints in the world but never enters PnP, which works on the
    canonical square and therefore returns translations in units of `side`.
    """

    points: tuple[tuple[float, float, float], ...] = UNIT_SQUARE
    side: float = 0.1

    def __post_init__(self) -> None:
        arr = np.asarray(self.points, dtype=float)
        if arr.shape != (4, 3):
            raise ValueError("KeypointTemplate needs exactly four 3D points")
        if np.any(np.abs(arr[:, 1]) > 0.0):
            raise ValueError("Template points must lie in the gripper x-z plane")
        if self.side <= 0:
            raise ValueError("Template side must be positive")
        object.__setattr__(self, "points", tuple(tuple(float(c) for c in p) for p in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    def plane_coordinates(self) -> np.ndarray:
        return self.array[:, [0, 2]]

    def world_points(self, pose: Pose) -> np.ndarray:
        """Physical keypoint positions for a metric gripper pose."""
        return pose.apply(self.array * self.side)

    def canonical_pose(self, pose: Pose) -> Pose:
        return Pose(pose.rotation, tuple(pose.t / self.side))

    def metric_pose(self, pose: Pose) -> Pose:
        return Pose(pose.rotation, tuple(pose.t * self.side))


@dataclass(frozen=True)
class BinSpec:
    M: int = 9

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError("BinSpec needs at least one orientation interval")

    @property
    def width(self) -> float:
        return math.pi / self.M

    def bin_of(self, theta: float) -> int:
        reduced = math.fmod(theta, math.pi)
        if reduced < 0.0:
            reduced += math.pi
        return min(int(math.floor(reduced * self.M / math.pi)), self.M - 1)


@dataclass(frozen=True)
class Grasp:
    pose: Pose
    width: float
    object_id: int = 0

    def transformed(self, transform: Pose) -> "Grasp":
        return Grasp(transform @ self.pose, self.width, self.object_id)

    def to_json(self) -> dict[str, Any]:
        return {"pose": self.pose.to_json(), "width": self.width, "object_id": self.object_id}

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "Grasp":
        return cls(Pose.from_json(payload["pose"]), float(payload["width"]), int(payload.get("object_id", 0)))


@dataclass(frozen=True)
class KeypointSet:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.points, dtype=float)
        if arr.shape != (4, 2) or not np.all(np.isfinite(arr)):
            raise ValueError("KeypointSet needs four finite pixel points")
        object.__setattr__(self, "points", tuple((float(u), float(v)) for u, v in arr))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "KeypointSet":
        return cls(tuple(map(tuple, np.asarray(arr, dtype=float))))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    def min_separation(self) -> float:
        arr = self.array
        diffs = arr[:, None, :] - arr[None, :, :]
        dists = np.sqrt((diffs**2).sum(axis=-1))
        return float(dists[np.triu_indices(4, k=1)].min())

    def is_degenerate(self, tolerance: float = 1e-6) -> bool:
        return self.min_separation() <= tolerance


def normalize_offsets(raw: np.ndarray, scale: float, normalization: str = "divide") -> np.ndarray:
    if normalization == "divide":
        return np.asarray(raw, dtype=float) / scale
    if normalization == "multiply":
        return np.asarray(raw, dtype=float) * scale
    raise ValueError(f"Unknown offset normalization {normalization!r}")


def denormalize_offsets(offsets: np.ndarray, scale: float, normalization: str = "divide") -> np.ndarray:
    if normalization == "divide":
        return np.asarray(offsets, dtype=float) * scale
    if normalization == "multiply":
        return np.asarray(offsets, dtype=float) / scale
    raise ValueError(f"Unknown offset normalization {normalization!r}")


@dataclass(frozen=True)
class GraspEncoding:
    """Image-space grasp: center, orientation bin, normalized offsets, scale, width.

    With the default "divide" normalization the stored offsets are raw pixel
    offsets divided by the scale (px/m); "multiply" stores raw offsets times the
    scale (px*m).
    """

    center: PixelPoint
    bin: int
    offsets: tuple[tuple[float, float], ...]
    scale: float
    width: float
    confidence: float = 1.0
    normalization: str = "divide"

    def __post_init__(self) -> None:
        arr = np.asarray(self.offsets, dtype=float)
        if arr.shape != (4, 2) or not np.all(np.isfinite(arr)):
            raise ValueError("GraspEncoding needs four finite 2D offsets")
        if not self.scale > 0:
            raise ValueError(f"GraspEncoding scale must be positive, got {self.scale!r}")
        if not self.width > 0:
            raise ValueError(f"GraspEncoding width must be positive, got {self.width!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"GraspEncoding confidence must be in [0, 1], got {self.confidence!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"Unknown offset normalization {self.normalization!r}")
        object.__setattr__(self, "offsets", tuple((float(du), float(dv)) for du, dv in arr))
        object.__setattr__(self, "bin", int(self.bin))
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "confidence", float(self.confidence))

    @property
    def offsets_array(self) -> np.ndarray:
        return np.array(self.offsets)

    def raw_offsets(self) -> np.ndarray:
        return denormalize_offsets(self.offsets_array, self.scale, self.normalization)

    def to_json(self) -> dict[str, Any]:
        return {
            "center": [self.center.u, self.center.v],
            "bin": self.bin,
            "offsets": [list(o) for o in self.offsets],
            "scale": self.scale,
            "width": self.width,
            "confidence": self.confidence,
            "normalization": self.normalization,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "GraspEncoding":
        u, v = payload["center"]
        return cls(
            center=PixelPoint(float(u), float(v)),
            bin=int(payload["bin"]),
            offsets=tuple(tuple(o) for o in payload["offsets"]),
            scale=float(payload["scale"]),
            width=float(payload["width"]),
            confidence=float(payload.get("confidence", 1.0)),
            normalization=str(payload.get("normalization", "divide")),
        )


def tip_angle(raw_offsets: np.ndarray) -> float:
    seg = raw_offsets[1] - raw_offsets[0]
    return math.atan2(float(seg[1]), float(seg[0]))


def encode(
    grasp: Grasp,
    K: CameraIntrinsics,
    bins: BinSpec = BinSpec(),
    template: KeypointTemplate = KeypointTemplate(),
    normalization: str = "divide",
) -> GraspEncoding:
    """Encodes a camera-frame grasp into its image-space representation."""
    translation = grasp.pose.t
    points = template.world_points(grasp.pose)
    if translation[2] <= MIN_DEPTH or np.any(points[:, 2] <= MIN_DEPTH):
        raise BehindCamera("Grasp keypoints are not in front of the camera")
    keypoints = project_points(points, K)
    if not np.all(K.contains(keypoints[:, 0], keypoints[:, 1])):
        raise OutOfFrame("A grasp keypoint projects outside the image")
    center = project(translation, K)
    scale = float(np.linalg.norm(translation))
    raw = keypoints - center.array
    return GraspEncoding(
        center=center,
        bin=bins.bin_of(tip_angle(raw)),
        offsets=tuple(map(tuple, normalize_offsets(raw, scale, normalization))),
        scale=scale,
        width=grasp.width,
        normalization=normalization,
    )


def decode_keypoints(enc: GraspEncoding) -> KeypointSet:
    return KeypointSet.from_array(enc.center.array + enc.raw_offsets())


def refine_scale(pnp_pose: Pose, scale: float) -> Pose:
    """Keeps the PnP rotation and rescales its translation to magnitude `scale`."""
    t = pnp_pose.t
    norm = float(np.linalg.norm(t))
    if norm <= MIN_TRANSLATION_NORM:
        raise DegenerateTranslation(f"PnP translation norm {norm!r} is too small to rescale")
    return Pose(pnp_pose.rotation, tuple(t * (scale / norm)))


Box = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class GripperGeometry:
    """Parallel-jaw gripper modeled as two finger boxes and a palm box."""

    finger_length: float = 0.04
    finger_thickness: float = 0.01
    finger_depth: float = 0.01
    palm_thickness: float = 0.02
    palm_depth: float = 0.02
    closing_depth: float = 0.01
    max_width: float = 0.10

    def finger_boxes(self, width: float) -> list[Box]:
        half = 0.5 * width
        outer = half + self.finger_thickness
        dy = 0.5 * self.finger_depth
        left = (np.array([-outer, -dy, 0.0]), np.array([-half, dy, self.finger_length]))
        right = (np.array([half, -dy, 0.0]), np.array([outer, dy, self.finger_length]))
        return [left, right]

    def palm_box(self, width: float) -> Box:
        outer = 0.5 * width + self.finger_thickness
        dy = 0.5 * self.palm_depth
        z0 = self.finger_length
        return (np.array([-outer, -dy, z0]), np.array([outer, dy, z0 + self.palm_thickness]))

    def closing_box(self, width: float) -> Box:
        half = 0.5 * width
        dy = 0.5 * self.closing_depth
        return (np.array([-half, -dy, 0.0]), np.array([half, dy, self.finger_length]))

    def body_boxes(self, width: float) -> list[Box]:
        return [*self.finger_boxes(width), self.palm_box(width)]

    def body_corners(self, pose: Pose, width: float) -> np.ndarray:
        """World coordinates of all finger and palm box corners, (24, 3)."""
        corners = [box_corners(box) for box in self.body_boxes(width)]
        return pose.apply(np.concatenate(corners, axis=0))


def box_corners(box: Box) -> np.ndarray:
    lo, hi = box
    idx = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)])
    return np.where(idx == 0, lo, hi)


def to_gripper_frame(pose: Pose, points: np.ndarray) -> np.ndarray:
    return (np.asarray(points, dtype=float) - pose.t) @ pose.rotation.matrix


def points_in_box(local_points: np.ndarray, box: Box) -> np.ndarray:
    lo, hi = box
    return np.all((local_points > lo) & (local_points < hi), axis=-1)


@dataclass(frozen=True)
class TablePlane:
    """Signed height above the table: normal . p + offset (meters)."""

    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    offset: float = 0.0

    @classmethod
    def from_extrinsic(cls, extrinsic: Pose) -> "TablePlane":
        """Table plane z=0 of the world expressed in the frame `extrinsic` maps into."""
        n = extrinsic.rotation.matrix[:, 2]
        return cls(tuple(n), float(-n @ extrinsic.t))

    def heights(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ np.array(self.normal) + self.offset


__all__ = [
    "BehindCamera",
    "BinSpec",
    "DegenerateTranslation",
    "Grasp",
    "GraspEncoding",
    "GripperGeometry",
    "KEYPOINT_NAMES",
    "KeypointSet",
    "KeypointTemplate",
    "OutOfFrame",
    "TablePlane",
    "decode_keypoints",
    "denormalize_offsets",
    "encode",
    "normalize_offsets",
    "points_in_box",
    "refine_scale",
    "to_gripper_frame",
]
