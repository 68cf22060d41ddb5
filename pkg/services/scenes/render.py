"""Analytic ray-cast depth renderer for primitive scenes."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .primitives import Primitive, PrimitiveKind, ring_sphere_centers

if TYPE_CHECKING:
    from .sampling import Scene

logger = logging.getLogger(__name__)

EPS = 1e-9


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Z-depth in meters (0 = no return) and object id mask (0 = background)."""

    depth: np.ndarray
    mask: np.ndarray

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])


def _quadratic_roots(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    disc = b * b - 4.0 * a * c
    miss = disc < 0.0
    sq = np.sqrt(np.where(miss, 0.0, disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (-b - sq) / (2.0 * a)
        t1 = (-b + sq) / (2.0 * a)
    t0 = np.where(miss, np.inf, t0)
    t1 = np.where(miss, np.inf, t1)
    return t0, t1


def _first_valid(*candidates: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    best = None
    for t, valid in candidates:
        t = np.where(valid & (t > EPS), t, np.inf)
        best = t if best is None else np.minimum(best, t)
    return best


def _sphere_roots(o: np.ndarray, d: np.ndarray, center: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    oc = o - center
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - r * r
    return _quadratic_roots(a, b, c)


def _disk_hit(o: np.ndarray, d: np.ndarray, z: float, r: float) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (z - o[:, 2]) / d[:, 2]
    x = o[:, 0] + t * d[:, 0]
    y = o[:, 1] + t * d[:, 1]
    return t, np.isfinite(t) & (x * x + y * y <= r * r)


def intersect_local(prim: Primitive, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Nearest positive ray parameter per ray in the primitive frame, inf on miss."""
    kind = prim.kind
    if kind is PrimitiveKind.SPHERE:
        t0, t1 = _sphere_roots(o, d, np.zeros(3), prim.sizes[0])
        return _first_valid((t0, np.isfinite(t0)), (t1, np.isfinite(t1)))

    if kind is PrimitiveKind.SEMISPHERE:
        r = prim.sizes[0]
        t0, t1 = _sphere_roots(o, d, np.zeros(3), r)
        z0 = o[:, 2] + np.where(np.isfinite(t0), t0, 0.0) * d[:, 2]
        z1 = o[:, 2] + np.where(np.isfinite(t1), t1, 0.0) * d[:, 2]
        return _first_valid(
            (t0, np.isfinite(t0) & (z0 >= 0.0)),
            (t1, np.isfinite(t1) & (z1 >= 0.0)),
            _disk_hit(o, d, 0.0, r),
        )

    if kind in (PrimitiveKind.CYLINDER, PrimitiveKind.STICK):
        r, h = prim.sizes
        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1])
        c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
        t0, t1 = _quadratic_roots(a, b, c)
        z0 = o[:, 2] + np.where(np.isfinite(t0), t0, 0.0) * d[:, 2]
        z1 = o[:, 2] + np.where(np.isfinite(t1), t1, 0.0) * d[:, 2]
        return _first_valid(
            (t0, np.isfinite(t0) & (np.abs(z0) <= 0.5 * h)),
            (t1, np.isfinite(t1) & (np.abs(z1) <= 0.5 * h)),
            _disk_hit(o, d, 0.5 * h, r),
            _disk_hit(o, d, -0.5 * h, r),
        )

    if kind is PrimitiveKind.CUBOID:
        half = np.array(prim.sizes) * 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (-half - o) / d
            t_hi = (half - o) / d
        t_near = np.nanmax(np.minimum(t_lo, t_hi), axis=1)
        t_far = np.nanmin(np.maximum(t_lo, t_hi), axis=1)
        hit = (t_near <= t_far) & (t_far > EPS)
        t = np.where(t_near > EPS, t_near, t_far)
        return np.where(hit, t, np.inf)

    if kind is PrimitiveKind.RING:
        r = prim.sizes[1]
        best = np.full(len(o), np.inf)
        for center in ring_sphere_centers(prim):
            t0, t1 = _sphere_roots(o, d, center, r)
            best = np.minimum(best, _first_valid((t0, np.isfinite(t0)), (t1, np.isfinite(t1))))
        return best

    raise ValueError(f"Unsupported primitive kind {kind!r}")


def _bounding_candidates(prim: Primitive, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    _, t1 = _sphere_roots(np.broadcast_to(origin, dirs.shape), dirs, prim.pose.t, prim.bounding_radius * 1.0001)
    return np.isfinite(t1) & (t1 > EPS)


def render_depth(
    scene: "Scene",
    noise_std: float = 0.0,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> DepthMap:
    """Per-pixel nearest intersection with the objects and the table plane z=0."""
    K = scene.camera.intrinsics
    extrinsic = scene.camera.extrinsic
    R_wc = extrinsic.rotation.matrix
    origin = -R_wc.T @ extrinsic.t
    rays = K.pixel_rays().reshape(-1, 3)
    dirs = rays @ R_wc

    n = len(dirs)
    ids = np.zeros(n, dtype=np.uint16)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_table = np.where(dirs[:, 2] < 0.0, -origin[2] / dirs[:, 2], np.inf)
    best = np.where(t_table > EPS, t_table, np.inf)

    for prim in scene.objects:
        candidates = np.nonzero(_bounding_candidates(prim, origin, dirs))[0]
        if candidates.size == 0:
            continue
        R_obj = prim.pose.rotation.matrix
        o_local = np.broadcast_to((origin - prim.pose.t) @ R_obj, (candidates.size, 3))
        d_local = dirs[candidates] @ R_obj
        t = intersect_local(prim, o_local, d_local)
        closer = t < best[candidates]
        best[candidates[closer]] = t[closer]
        ids[candidates[closer]] = prim.object_id

    depth = np.where(np.isfinite(best), best, 0.0)
    if noise_std > 0.0 or dropout > 0.0:
        if rng is None:
            raise ValueError("Depth noise needs a random generator")
        returns = depth > 0.0
        if noise_std > 0.0:
            depth = np.where(returns, np.maximum(depth + noise_std * rng.standard_normal(n), EPS), 0.0)
        if dropout > 0.0:
            depth = np.where(rng.random(n) < dropout, 0.0, depth)
    logger.debug("Rendered %d returns for scene %s", int(np.count_nonzero(depth)), scene.index)
    return DepthMap(depth=depth.reshape(K.height, K.width), mask=ids.reshape(K.height, K.width))


__all__ = ["DepthMap", "intersect_local", "render_depth"]
