"""Gripper-box collision and enclosure tests against surface clouds and the table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gripper import Grasp, GripperGeometry, TablePlane, points_in_box, to_gripper_frame


@dataclass(frozen=True, eq=False)
class SurfaceCloud:
    points: np.ndarray
    object_ids: np.ndarray

    def __len__(self) -> int:
        return int(len(self.points))

    def subset(self, object_id: int) -> np.ndarray:
        return self.points[self.object_ids == object_id]


def table_violation(grasp: Grasp, table: TablePlane, geometry: GripperGeometry) -> bool:
    corners = geometry.body_corners(grasp.pose, grasp.width)
    return bool(np.any(table.heights(corners) < 0.0))


def body_hits(local_points: np.ndarray, width: float, geometry: GripperGeometry, include_palm: bool = True) -> bool:
    boxes = geometry.body_boxes(width) if include_palm else geometry.finger_boxes(width)
    return any(bool(np.any(points_in_box(local_points, box))) for box in boxes)


def enclosed_count(local_points: np.ndarray, width: float, geometry: GripperGeometry) -> int:
    return int(np.count_nonzero(points_in_box(local_points, geometry.closing_box(width))))


def grasp_collides(
    grasp: Grasp,
    cloud: SurfaceCloud,
    target_id: int,
    geometry: GripperGeometry = GripperGeometry(),
    table: TablePlane = TablePlane(),
) -> bool:
    """True when the gripper hits the table, another object, or the target with a finger."""
    if table_violation(grasp, table, geometry):
        return True
    local = to_gripper_frame(grasp.pose, cloud.points)
    others = cloud.object_ids != target_id
    if body_hits(local[others], grasp.width, geometry):
        return True
    # Palm is exempt against the target: family grasps sit at the target's center, so any
    # body with a half-span over the finger length (cylinders with r > 0.04) reaches the palm.
    return body_hits(local[~others], grasp.width, geometry, include_palm=False)


__all__ = ["SurfaceCloud", "body_hits", "enclosed_count", "grasp_collides", "table_violation"]
