"""Rigid-body math, pinhole camera model, and pose-error metrics.

Camera convention used everywhere: +z forward, +x right, +y down, so a point in
front of the camera has z > 0 and projects with u growing rightwards and v
growing downwards. Pixel centers sit at integer coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Sequence

import numpy as np

MIN_DEPTH = 1e-6


class NonPositiveDepth(ValueError):
    pass


def hat(omega: Sequence[float]) -> np.ndarray:
    x, y, z = (float(v) for v in omega)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_exp(omega: Sequence[float]) -> np.ndarray:
    """Rodrigues map from a rotation vector to a rotation matrix."""
    w = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(w))
    W = hat(w)
    if theta < 1e-8:
        return np.eye(3) + W + 0.5 * (W @ W)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * W + b * (W @ W)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of (..., 4) quaternion arrays stored as (w, x, y, z)."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def _matrix_to_quat(R: np.ndarray) -> np.ndarray:
    m = np.asarray(R, dtype=float)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0.0:
        s = 2.0 * math.sqrt(trace + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    out = np.array(q)
    if out[0] < 0.0:
        out = -out
    return out


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion (w, x, y, z); the matrix form is derived on demand."""

    q: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.q, dtype=float).reshape(-1)
        if arr.shape != (4,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"Rotation needs four finite components, got {self.q!r}")
        norm = math.sqrt(float(arr @ arr))
        if norm < 1e-12:
            raise ValueError("Rotation quaternion has zero norm")
        object.__setattr__(self, "q", tuple(float(v) / norm for v in arr))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls()

    @classmethod
    def from_matrix(cls, R: np.ndarray) -> "Rotation":
        return cls(tuple(_matrix_to_quat(R)))

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float]) -> "Rotation":
        v = np.asarray(rotvec, dtype=float)
        angle = float(np.linalg.norm(v))
        if angle < 1e-15:
            return cls()
        axis = v / angle
        half = 0.5 * angle
        return cls((math.cos(half), *(math.sin(half) * axis)))

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "Rotation":
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        half = 0.5 * float(angle)
        return cls((math.cos(half), *(math.sin(half) * a)))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        # Normalized 4D Gaussian is uniform on SO(3).
        return cls(tuple(rng.standard_normal(4)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.q)

    @cached_property
    def matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        R = np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
        R.setflags(write=False)
        return R

    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation((w, -x, -y, -z))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(tuple(quat_multiply(self.array, other.array)))

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        v = np.asarray(vectors, dtype=float)
        return v @ self.matrix.T


@dataclass(frozen=True)
class Pose:
    """Rigid transform x -> R x + t, translation in meters."""

    rotation: Rotation = Rotation()
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError(f"Pose translation must be a finite 3-vector, got {self.translation!r}")
        object.__setattr__(self, "translation", tuple(float(v) for v in t))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(Rotation.from_matrix(T[:3, :3]), tuple(T[:3, 3]))

    @classmethod
    def from_rt(cls, R: np.ndarray, t: Sequence[float]) -> "Pose":
        return cls(Rotation.from_matrix(R), tuple(np.asarray(t, dtype=float)))

    @property
    def t(self) -> np.ndarray:
        return np.array(self.translation)

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation.matrix
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        inv = self.rotation.inverse()
        return Pose(inv, tuple(-inv.apply(self.t)))

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(self.rotation * other.rotation, tuple(self.rotation.apply(other.t) + self.t))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.rotation.apply(points) + self.t

    def with_translation(self, translation: Sequence[float]) -> "Pose":
        return Pose(self.rotation, tuple(translation))

    def to_json(self) -> dict[str, list[float]]:
        return {"q": list(self.rotation.q), "t": list(self.translation)}

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "Pose":
        return cls(Rotation(tuple(payload["q"])), tuple(payload["t"]))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("Focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("Principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def contains(self, u: np.ndarray | float, v: np.ndarray | float) -> np.ndarray | bool:
        return (u >= 0) & (u < self.width) & (v >= 0) & (v < self.height)

    def pixel_rays(self) -> np.ndarray:
        """(height, width, 3) ray directions with unit z component, one per pixel center."""
        vv, uu = np.meshgrid(np.arange(self.height, dtype=float), np.arange(self.width, dtype=float), indexing="ij")
        return np.stack([(uu - self.cx) / self.fx, (vv - self.cy) / self.fy, np.ones_like(uu)], axis=-1)

    def to_json(self) -> dict[str, float | int]:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "CameraIntrinsics":
        return cls(
            fx=float(payload["fx"]),
            fy=float(payload["fy"]),
            cx=float(payload["cx"]),
            cy=float(payload["cy"]),
            width=int(payload["width"]),
            height=int(payload["height"]),
        )


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("PixelPoint coordinates must be finite")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.u, self.v])


def project(point: Sequence[float], K: CameraIntrinsics) -> PixelPoint:
    x, y, z = (float(c) for c in point)
    if z <= MIN_DEPTH:
        raise NonPositiveDepth(f"Point depth {z!r} is not in front of the camera")
    return PixelPoint(K.fx * x / z + K.cx, K.fy * y / z + K.cy)


def project_points(points: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Vectorized `project` for an (N, 3) array; returns (N, 2)."""
    p = np.asarray(points, dtype=float)
    z = p[..., 2]
    if np.any(z <= MIN_DEPTH):
        raise NonPositiveDepth("At least one point is not in front of the camera")
    return np.stack([K.fx * p[..., 0] / z + K.cx, K.fy * p[..., 1] / z + K.cy], axis=-1)


def backproject(pixel: PixelPoint, depth: float, K: CameraIntrinsics) -> np.ndarray:
    return np.array([(pixel.u - K.cx) * depth / K.fx, (pixel.v - K.cy) * depth / K.fy, depth])


def look_at(eye: Sequence[float], target: Sequence[float], up: Sequence[float] = (0.0, 0.0, 1.0)) -> Pose:
    """World->camera extrinsic for a camera at `eye` looking at `target`."""
    eye_v = np.asarray(eye, dtype=float)
    forward = np.asarray(target, dtype=float) - eye_v
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=float))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    R_wc = np.stack([right, down, forward], axis=0)
    return Pose.from_rt(R_wc, -R_wc @ eye_v)


def _relative_angle(qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = qa[..., 0], qa[..., 1], qa[..., 2], qa[..., 3]
    bw, bx, by, bz = qb[..., 0], qb[..., 1], qb[..., 2], qb[..., 3]
    w = aw * bw + ax * bx + ay * by + az * bz
    x = aw * bx - ax * bw - ay * bz + az * by
    y = aw * by + ax * bz - ay * bw - az * bx
    z = aw * bz - ax * by + ay * bx - az * bw
    return 2.0 * np.arctan2(np.sqrt(x * x + y * y + z * z), np.abs(w))


def _flip_about_approach(qb: np.ndarray) -> np.ndarray:
    # qb composed with a half turn about the gripper z axis.
    return np.stack([-qb[..., 3], qb[..., 2], -qb[..., 1], qb[..., 0]], axis=-1)


def rotation_errors(qa: np.ndarray, qb: np.ndarray, symmetric: bool = False) -> np.ndarray:
    """Broadcasting minimum alignment angle between quaternion arrays, radians."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    angles = _relative_angle(qa, qb)
    if symmetric:
        angles = np.minimum(angles, _relative_angle(qa, _flip_about_approach(qb)))
    return angles


def rotation_error(a: Rotation, b: Rotation, symmetric: bool = False) -> float:
    return float(rotation_errors(a.array[None, :], b.array[None, :], symmetric)[0])


def translation_errors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2])


def translation_error(a: Sequence[float], b: Sequence[float]) -> float:
    return float(translation_errors(np.asarray(a, dtype=float)[None, :], np.asarray(b, dtype=float)[None, :])[0])


__all__ = [
    "CameraIntrinsics",
    "NonPositiveDepth",
    "PixelPoint",
    "Pose",
    "Rotation",
    "backproject",
    "hat",
    "look_at",
    "project",
    "project_points",
    "quat_multiply",
    "rotation_error",
    "rotation_errors",
    "so3_exp",
    "translation_error",
    "translation_errors",
]
