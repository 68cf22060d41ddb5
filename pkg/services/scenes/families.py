"""Closed-form grasp families per primitive, expressed in the object's local frame."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..geometry import Pose
from .primitives import Primitive, PrimitiveKind

CLEARANCE = 0.01
SPHERE_MAX_POLAR = math.radians(60.0)
SEMISPHERE_MAX_POLAR = math.radians(45.0)
CUBOID_STATIONS = 5
TOP_PINCH_DEPTH = 0.02


@dataclass(frozen=True)
class ParameterRange:
    name: str
    lo: float
    hi: float
    endpoint: bool = True
    count: int | None = None

    def samples(self, density: int) -> np.ndarray:
        n = self.count if self.count is not None else density
        return np.linspace(self.lo, self.hi, n, endpoint=self.endpoint)


@dataclass(frozen=True)
class FamilyGrasp:
    pose: Pose
    width: float
    family: str
    params: tuple[float, ...]


@dataclass(frozen=True)
class GraspFamily:
    name: str
    kind: PrimitiveKind
    sizes: tuple[float, ...]
    domain: tuple[ParameterRange, ...]
    width: float
    pose_map: Callable[[tuple[float, ...]], Pose]

    def grid(self, density: int) -> list[tuple[float, ...]]:
        if density < 1:
            raise ValueError("Family density must be at least 1")
        axes = [r.samples(density) for r in self.domain]
        return [tuple(float(v) for v in combo) for combo in itertools.product(*axes)]

    def evaluate(self, density: int) -> list[FamilyGrasp]:
        return [FamilyGrasp(self.pose_map(params), self.width, self.name, params) for params in self.grid(density)]


def grasp_frame(x_axis: np.ndarray, z_axis: np.ndarray, origin: np.ndarray) -> Pose:
    x = np.asarray(x_axis, dtype=float)
    z = np.asarray(z_axis, dtype=float)
    y = np.cross(z, x)
    return Pose.from_rt(np.column_stack([x, y, z]), origin)


def grasp_width(span: float, max_width: float) -> float:
    return min(span + CLEARANCE, max_width)


def _cylinder_families(prim: Primitive, max_width: float) -> list[GraspFamily]:
    r, h = prim.sizes
    if 2.0 * r > max_width:
        return []
    width = grasp_width(2.0 * r, max_width)

    def side(params: tuple[float, ...]) -> Pose:
        phi, height = params
        c, s = math.cos(phi), math.sin(phi)
        return grasp_frame(np.array([-s, c, 0.0]), np.array([c, s, 0.0]), np.array([0.0, 0.0, height - 0.5 * h]))

    families = [
        GraspFamily(
            name=f"{prim.kind.value.lower()}_side",
            kind=prim.kind,
            sizes=prim.sizes,
            domain=(
                ParameterRange("phi", 0.0, 2.0 * math.pi, endpoint=False),
                ParameterRange("height", 0.2 * h, 0.8 * h),
            ),
            width=width,
            pose_map=side,
        )
    ]
    if prim.kind is PrimitiveKind.CYLINDER:
        depth = min(TOP_PINCH_DEPTH, 0.5 * h)

        def top(params: tuple[float, ...]) -> Pose:
            (phi,) = params
            return grasp_frame(
                np.array([math.cos(phi), math.sin(phi), 0.0]),
                np.array([0.0, 0.0, 1.0]),
                np.array([0.0, 0.0, 0.5 * h - depth]),
            )

        families.append(
            GraspFamily(
                name="cylinder_top",
                kind=prim.kind,
                sizes=prim.sizes,
                domain=(ParameterRange("phi", 0.0, math.pi, endpoint=False),),
                width=width,
                pose_map=top,
            )
        )
    return families


def _sphere_family(prim: Primitive, max_width: float) -> list[GraspFamily]:
    r = prim.sizes[0]
    if 2.0 * r > max_width:
        return []
    semi = prim.kind is PrimitiveKind.SEMISPHERE
    origin = np.array([0.0, 0.0, 0.5 * r if semi else 0.0])

    def pose_map(params: tuple[float, ...]) -> Pose:
        azimuth, polar = params
        ca, sa = math.cos(azimuth), math.sin(azimuth)
        sp, cp = math.sin(polar), math.cos(polar)
        return grasp_frame(np.array([-sa, ca, 0.0]), np.array([sp * ca, sp * sa, cp]), origin)

    return [
        GraspFamily(
            name="semisphere" if semi else "sphere",
            kind=prim.kind,
            sizes=prim.sizes,
            domain=(
                ParameterRange("azimuth", 0.0, 2.0 * math.pi, endpoint=False),
                ParameterRange("polar", 0.0, SEMISPHERE_MAX_POLAR if semi else SPHERE_MAX_POLAR),
            ),
            width=grasp_width(2.0 * r, max_width),
            pose_map=pose_map,
        )
    ]


def _ring_family(prim: Primitive, max_width: float) -> list[GraspFamily]:
    R, r = prim.sizes
    if 2.0 * r > max_width:
        return []

    def pose_map(params: tuple[float, ...]) -> Pose:
        (phi,) = params
        radial = np.array([math.cos(phi), math.sin(phi), 0.0])
        return grasp_frame(radial, np.array([0.0, 0.0, 1.0]), R * radial)

    return [
        GraspFamily(
            name="ring",
            kind=prim.kind,
            sizes=prim.sizes,
            domain=(ParameterRange("phi", 0.0, 2.0 * math.pi, endpoint=False),),
            width=grasp_width(2.0 * r, max_width),
            pose_map=pose_map,
        )
    ]


def _cuboid_families(prim: Primitive, max_width: float) -> list[GraspFamily]:
    extents = np.array(prim.sizes)
    axes = np.eye(3)
    families = []
    for closing in range(3):
        if extents[closing] > max_width:
            continue
        approaches = [
            (j, sign)
            for j in range(3)
            if j != closing
            for sign in (1.0, -1.0)
            if not (j == 2 and sign < 0.0)
        ]

        def pose_map(params: tuple[float, ...], closing: int = closing, approaches=approaches) -> Pose:
            index, station = params
            j, sign = approaches[int(round(index))]
            sweep = 3 - closing - j
            origin = axes[sweep] * station * extents[sweep]
            return grasp_frame(axes[closing], sign * axes[j], origin)

        families.append(
            GraspFamily(
                name=f"cuboid_{'xyz'[closing]}",
                kind=prim.kind,
                sizes=prim.sizes,
                domain=(
                    ParameterRange("approach", 0.0, float(len(approaches) - 1), count=len(approaches)),
                    ParameterRange("station", -0.25, 0.25, count=CUBOID_STATIONS),
                ),
                width=grasp_width(float(extents[closing]), max_width),
                pose_map=pose_map,
            )
        )
    return families


def families_for(prim: Primitive, max_width: float = 0.10) -> list[GraspFamily]:
    kind = prim.kind
    if kind in (PrimitiveKind.CYLINDER, PrimitiveKind.STICK):
        return _cylinder_families(prim, max_width)
    if kind in (PrimitiveKind.SPHERE, PrimitiveKind.SEMISPHERE):
        return _sphere_family(prim, max_width)
    if kind is PrimitiveKind.RING:
        return _ring_family(prim, max_width)
    if kind is PrimitiveKind.CUBOID:
        return _cuboid_families(prim, max_width)
    raise ValueError(f"Unsupported primitive kind {kind!r}")


__all__ = [
    "CLEARANCE",
    "FamilyGrasp",
    "GraspFamily",
    "ParameterRange",
    "families_for",
    "grasp_frame",
    "grasp_width",
]
