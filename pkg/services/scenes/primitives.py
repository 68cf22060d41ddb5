"""Parametric primitive shapes: validation, surface sampling, containment.

Local frames are z-up with the origin at the shape center, except SemiSphere
whose origin is the center of its flat face (dome towards +z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from ..geometry import Pose


class PrimitiveKind(str, Enum):
    CYLINDER = "Cylinder"
    RING = "Ring"
    STICK = "Stick"
    SPHERE = "Sphere"
    SEMISPHERE = "SemiSphere"
    CUBOID = "Cuboid"


SIZE_FIELDS: dict[PrimitiveKind, tuple[str, ...]] = {
    PrimitiveKind.CYLINDER: ("r", "h"),
    PrimitiveKind.STICK: ("r", "h"),
    PrimitiveKind.RING: ("R", "r"),
    PrimitiveKind.SPHERE: ("r",),
    PrimitiveKind.SEMISPHERE: ("r",),
    PrimitiveKind.CUBOID: ("a", "b", "c"),
}

RING_SPHERES = 64


@dataclass(frozen=True)
class Primitive:
    kind: PrimitiveKind
    sizes: tuple[float, ...]
    pose: Pose
    color: int = 0
    object_id: int = 1

    def __post_init__(self) -> None:
        kind = PrimitiveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        sizes = tuple(float(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) != len(SIZE_FIELDS[kind]):
            raise ValueError(f"{kind.value} needs sizes {SIZE_FIELDS[kind]}, got {sizes}")
        if any(not (s > 0) for s in sizes):
            raise ValueError(f"{kind.value} sizes must be positive, got {sizes}")
        if kind is PrimitiveKind.STICK and (sizes[0] > 0.01 or sizes[1] < 5 * sizes[0]):
            raise ValueError("Stick needs r <= 0.01 m and h >= 5r")
        if kind is PrimitiveKind.RING and not sizes[1] < sizes[0]:
            raise ValueError("Ring tube radius must be smaller than its major radius")

    def size(self, name: str) -> float:
        return self.sizes[SIZE_FIELDS[self.kind].index(name)]

    @property
    def rest_height(self) -> float:
        """Height of the local origin above the table when resting."""
        kind = self.kind
        if kind in (PrimitiveKind.CYLINDER, PrimitiveKind.STICK):
            return 0.5 * self.sizes[1]
        if kind is PrimitiveKind.CUBOID:
            return 0.5 * self.sizes[2]
        if kind in (PrimitiveKind.RING, PrimitiveKind.SPHERE):
            return self.sizes[1] if kind is PrimitiveKind.RING else self.sizes[0]
        return 0.0

    @property
    def footprint_radius(self) -> float:
        kind = self.kind
        if kind is PrimitiveKind.CUBOID:
            return 0.5 * math.hypot(self.sizes[0], self.sizes[1])
        if kind is PrimitiveKind.RING:
            return self.sizes[0] + self.sizes[1]
        return self.sizes[0]

    @property
    def bounding_radius(self) -> float:
        """Radius of a sphere about the local origin enclosing the shape."""
        kind = self.kind
        if kind in (PrimitiveKind.CYLINDER, PrimitiveKind.STICK):
            return math.hypot(self.sizes[0], 0.5 * self.sizes[1])
        if kind is PrimitiveKind.CUBOID:
            return 0.5 * math.sqrt(sum(s * s for s in self.sizes))
        if kind is PrimitiveKind.RING:
            return self.sizes[0] + self.sizes[1]
        return self.sizes[0]

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.pose.t) @ self.pose.rotation.matrix

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.object_id,
            "kind": self.kind.value,
            "sizes": dict(zip(SIZE_FIELDS[self.kind], self.sizes)),
            "pose": self.pose.to_json(),
            "color": self.color,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "Primitive":
        kind = PrimitiveKind(payload["kind"])
        sizes = tuple(float(payload["sizes"][name]) for name in SIZE_FIELDS[kind])
        return cls(
            kind=kind,
            sizes=sizes,
            pose=Pose.from_json(payload["pose"]),
            color=int(payload.get("color", 0)),
            object_id=int(payload["id"]),
        )


def _disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    rho = radius * np.sqrt(rng.random(n))
    phi = 2.0 * math.pi * rng.random(n)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])


def _sample_local(prim: Primitive, n: int, rng: np.random.Generator) -> np.ndarray:
    kind = prim.kind
    if kind is PrimitiveKind.SPHERE:
        v = rng.standard_normal((n, 3))
        return prim.sizes[0] * v / np.linalg.norm(v, axis=1, keepdims=True)

    if kind is PrimitiveKind.SEMISPHERE:
        r = prim.sizes[0]
        # Dome area 2*pi*r^2 against flat face pi*r^2.
        on_dome = rng.random(n) < 2.0 / 3.0
        z = rng.random(n)
        phi = 2.0 * math.pi * rng.random(n)
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        dome = r * np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
        flat = np.column_stack([_disk(rng, n, r), np.zeros(n)])
        return np.where(on_dome[:, None], dome, flat)

    if kind in (PrimitiveKind.CYLINDER, PrimitiveKind.STICK):
        r, h = prim.sizes
        side_area = 2.0 * math.pi * r * h
        cap_area = math.pi * r * r
        u = rng.random(n) * (side_area + 2.0 * cap_area)
        phi = 2.0 * math.pi * rng.random(n)
        side = np.column_stack([r * np.cos(phi), r * np.sin(phi), h * (rng.random(n) - 0.5)])
        disk = _disk(rng, n, r)
        cap_z = np.where(u < side_area + cap_area, 0.5 * h, -0.5 * h)
        caps = np.column_stack([disk, cap_z])
        return np.where((u < side_area)[:, None], side, caps)

    if kind is PrimitiveKind.CUBOID:
        a, b, c = prim.sizes
        half = np.array([a, b, c]) * 0.5
        areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
        faces = rng.choice(6, size=n, p=areas / areas.sum())
        pts = (rng.random((n, 3)) * 2.0 - 1.0) * half
        axis = faces // 2
        sign = np.where(faces % 2 == 0, 1.0, -1.0)
        pts[np.arange(n), axis] = sign * half[axis]
        return pts

    if kind is PrimitiveKind.RING:
        R, r = prim.sizes
        out = np.empty((0, 3))
        while len(out) < n:
            m = 2 * (n - len(out)) + 16
            u = 2.0 * math.pi * rng.random(m)
            v = 2.0 * math.pi * rng.random(m)
            keep = rng.random(m) < (R + r * np.cos(v)) / (R + r)
            u, v = u[keep], v[keep]
            ring = R + r * np.cos(v)
            out = np.vstack([out, np.column_stack([ring * np.cos(u), ring * np.sin(u), r * np.sin(v)])])
        return out[:n]

    raise ValueError(f"Unsupported primitive kind {kind!r}")


def sample_surface(prim: Primitive, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform-area surface samples in the world frame, (n, 3)."""
    if n < 1:
        raise ValueError("Need at least one surface sample")
    return prim.pose.apply(_sample_local(prim, n, rng))


def contains(prim: Primitive, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
    """Strict point-in-primitive test for world points, optionally inflated by `margin`."""
    p = prim.to_local(points)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    kind = prim.kind
    if kind is PrimitiveKind.SPHERE:
        r = prim.sizes[0] + margin
        return x * x + y * y + z * z < r * r
    if kind is PrimitiveKind.SEMISPHERE:
        r = prim.sizes[0] + margin
        return (x * x + y * y + z * z < r * r) & (z > -margin)
    if kind in (PrimitiveKind.CYLINDER, PrimitiveKind.STICK):
        r = prim.sizes[0] + margin
        return (x * x + y * y < r * r) & (np.abs(z) < 0.5 * prim.sizes[1] + margin)
    if kind is PrimitiveKind.CUBOID:
        half = np.array(prim.sizes) * 0.5 + margin
        return np.all(np.abs(p) < half, axis=1)
    if kind is PrimitiveKind.RING:
        R, r = prim.sizes
        tube = np.sqrt(x * x + y * y) - R
        return tube * tube + z * z < (r + margin) ** 2
    raise ValueError(f"Unsupported primitive kind {kind!r}")


def ring_sphere_centers(prim: Primitive) -> np.ndarray:
    R = prim.sizes[0]
    phi = 2.0 * math.pi * np.arange(RING_SPHERES) / RING_SPHERES
    return np.column_stack([R * np.cos(phi), R * np.sin(phi), np.zeros(RING_SPHERES)])


__all__ = [
    "Primitive",
    "PrimitiveKind",
    "RING_SPHERES",
    "SIZE_FIELDS",
    "contains",
    "ring_sphere_centers",
    "sample_surface",
]
