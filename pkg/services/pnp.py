"""Pose-up-to-scale recovery from four coplanar gripper keypoints."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import MIN_DEPTH, CameraIntrinsics, Pose, Rotation, hat, project_points, so3_exp
from .gripper import KeypointSet, KeypointTemplate

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e8
GN_MAX_ITERATIONS = 10
GN_STEP_TOLERANCE = 1e-10

# Gripper-frame template (x, 0, z) -> plane coordinates (x, z, 0).
PLANE_FROM_GRIPPER = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])


class DegenerateConfiguration(ValueError):
    pass


class BehindCameraSolution(RuntimeError):
    pass


@dataclass(frozen=True)
class PnPResult:
    candidates: tuple[Pose, ...]
    reprojection_errors: tuple[float, ...]

    @property
    def best(self) -> Pose:
        return self.candidates[0]

    @property
    def ambiguity_ratio(self) -> float:
        if len(self.reprojection_errors) < 2 or self.reprojection_errors[1] == 0.0:
            return 1.0
        return self.reprojection_errors[0] / self.reprojection_errors[1]


def reprojection_error(
    pose: Pose, kps: KeypointSet, template: KeypointTemplate, K: CameraIntrinsics
) -> float:
    """RMS pixel distance; `pose` is expressed in canonical template units."""
    projected = project_points(pose.apply(template.array), K)
    residual = projected - kps.array
    return float(math.sqrt(np.mean(np.sum(residual * residual, axis=1))))


def _hartley(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = points.mean(axis=0)
    spread = float(np.mean(np.linalg.norm(points - mean, axis=1)))
    if spread < 1e-15:
        raise DegenerateConfiguration("All points coincide")
    s = math.sqrt(2.0) / spread
    T = np.array([[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]])
    return (points - mean) * s, T


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Plane-to-image homography by normalized DLT, scaled so H[2, 2] = 1."""
    ns, Ts = _hartley(src)
    nd, Td = _hartley(dst)
    rows = []
    for (x, y), (u, v) in zip(ns, nd):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
    _, s, vt = np.linalg.svd(np.array(rows))
    condition = s[0] / s[-1] if s[-1] > 0 else math.inf
    if condition > CONDITION_LIMIT:
        raise DegenerateConfiguration(f"Homography system condition number {condition:.3g} exceeds limit")
    H = np.linalg.inv(Td) @ vt[-1].reshape(3, 3) @ Ts
    if abs(H[2, 2]) < 1e-12:
        raise DegenerateConfiguration("Template centroid maps to infinity")
    return H / H[2, 2]


def _centroid_rotations(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two plane rotations from the homography Jacobian at the plane origin."""
    p, q = H[0, 2], H[1, 2]
    J = np.array(
        [
            [H[0, 0] - H[2, 0] * p, H[0, 1] - H[2, 1] * p],
            [H[1, 0] - H[2, 0] * q, H[1, 1] - H[2, 1] * q],
        ]
    )
    radial = math.hypot(p, q)
    if radial < 1e-15:
        Rv = np.eye(3)
    else:
        Rv = Rotation.from_axis_angle((-q / radial, p / radial, 0.0), math.atan2(radial, 1.0)).matrix
    B = np.array([[1.0, 0.0, -p], [0.0, 1.0, -q]]) @ Rv[:, :2]
    A = np.linalg.solve(B, J)
    gamma = float(np.linalg.svd(A, compute_uv=False)[0])
    if gamma <= 0.0:
        raise DegenerateConfiguration("Homography Jacobian vanishes")
    R22 = A / gamma
    b0 = math.sqrt(max(0.0, 1.0 - R22[0, 0] ** 2 - R22[1, 0] ** 2))
    b1 = math.sqrt(max(0.0, 1.0 - R22[0, 1] ** 2 - R22[1, 1] ** 2))
    if R22[0, 0] * R22[0, 1] + R22[1, 0] * R22[1, 1] > 0.0:
        b1 = -b1
    solutions = []
    for sign in (1.0, -1.0):
        c1 = np.array([R22[0, 0], R22[1, 0], sign * b0])
        c2 = np.array([R22[0, 1], R22[1, 1], sign * b1])
        solutions.append(Rv @ np.column_stack([c1, c2, np.cross(c1, c2)]))
    return solutions[0], solutions[1]


def _translation_for(R: np.ndarray, plane_points: np.ndarray, normalized: np.ndarray) -> np.ndarray:
    rows = []
    rhs = []
    for m, (x, y) in zip(plane_points, normalized):
        Rm = R @ np.array([m[0], m[1], 0.0])
        rows.append([1.0, 0.0, -x])
        rhs.append(x * Rm[2] - Rm[0])
        rows.append([0.0, 1.0, -y])
        rhs.append(y * Rm[2] - Rm[1])
    t, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return t


def gauss_newton_polish(
    pose: Pose,
    kps: KeypointSet,
    template: KeypointTemplate,
    K: CameraIntrinsics,
    max_iterations: int = GN_MAX_ITERATIONS,
    step_tolerance: float = GN_STEP_TOLERANCE,
) -> Pose:
    """Minimizes pixel reprojection error with left so(3) updates."""
    R = pose.rotation.matrix.copy()
    t = pose.t
    points = template.array
    observed = kps.array.reshape(-1)
    for _ in range(max_iterations):
        cam = points @ R.T + t
        if np.any(cam[:, 2] <= MIN_DEPTH):
            break
        x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
        residual = np.stack([K.fx * x / z + K.cx, K.fy * y / z + K.cy], axis=1).reshape(-1) - observed
        jac = np.zeros((2 * len(points), 6))
        for i, p in enumerate(cam):
            d_proj = np.array(
                [
                    [K.fx / p[2], 0.0, -K.fx * p[0] / p[2] ** 2],
                    [0.0, K.fy / p[2], -K.fy * p[1] / p[2] ** 2],
                ]
            )
            jac[2 * i : 2 * i + 2, :3] = d_proj @ -hat(p - t)
            jac[2 * i : 2 * i + 2, 3:] = d_proj
        step, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
        R = so3_exp(step[:3]) @ R
        t = t + step[3:]
        if float(np.linalg.norm(step)) < step_tolerance:
            break
    return Pose.from_rt(R, t)


def solve_planar_pnp(kps: KeypointSet, template: KeypointTemplate, K: CameraIntrinsics) -> PnPResult:
    """Recovers up to two template poses, translation in canonical template units."""
    if kps.is_degenerate():
        raise DegenerateConfiguration("Two keypoints coincide")
    plane = (template.array @ PLANE_FROM_GRIPPER.T)[:, :2]
    centroid = plane.mean(axis=0)
    centered = plane - centroid
    image = kps.array
    normalized = np.column_stack([(image[:, 0] - K.cx) / K.fx, (image[:, 1] - K.cy) / K.fy])
    H = _homography(centered, normalized)

    candidates: list[tuple[float, Pose]] = []
    for R_plane in _centroid_rotations(H):
        t_centered = _translation_for(R_plane, centered, normalized)
        t = t_centered - R_plane @ np.array([centroid[0], centroid[1], 0.0])
        pose = Pose.from_rt(R_plane @ PLANE_FROM_GRIPPER, t)
        cam = pose.apply(template.array)
        if np.any(cam[:, 2] <= MIN_DEPTH):
            continue
        error = reprojection_error(pose, kps, template, K)
        polished = gauss_newton_polish(pose, kps, template, K)
        if np.all(polished.apply(template.array)[:, 2] > MIN_DEPTH):
            polished_error = reprojection_error(polished, kps, template, K)
            if polished_error <= error:
                pose, error = polished, polished_error
        candidates.append((error, pose))

    if not candidates:
        raise BehindCameraSolution("No PnP candidate places the template in front of the camera")
    candidates.sort(key=lambda item: item[0])
    return PnPResult(
        candidates=tuple(pose for _, pose in candidates),
        reprojection_errors=tuple(error for error, _ in candidates),
    )


__all__ = [
    "BehindCameraSolution",
    "DegenerateConfiguration",
    "PnPResult",
    "gauss_newton_polish",
    "reprojection_error",
    "solve_planar_pnp",
]
