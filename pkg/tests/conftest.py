from __future__ import annotations

import os

os.environ["APP_ENV"] = "testing"
os.environ["LOAD_DOTENV"] = "0"
os.environ["ASYNC_TASKS_ENABLED"] = "false"
os.environ.pop("GRASPKIT_SEED", None)

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from services.geometry import CameraIntrinsics, Pose, Rotation  # noqa: E402
from services.gripper import KeypointTemplate  # noqa: E402

# Template plane facing the camera: gripper y along the negative optical axis.
FACING = Rotation.from_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]))


@pytest.fixture
def intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=550.0, fy=550.0, cx=256.0, cy=256.0, width=512, height=512)


@pytest.fixture
def template() -> KeypointTemplate:
    return KeypointTemplate()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def facing_pose(distance: float, tilt: float = 0.0) -> Pose:
    """Template plane facing the camera at `distance` on the optical axis, optionally tilted about x."""
    rotation = Rotation.from_axis_angle((1.0, 0.0, 0.0), tilt) * FACING
    return Pose(rotation, (0.0, 0.0, distance))
