"""PNG previews of rendered depth maps and object masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .scenes.render import DepthMap

MASK_LEVEL_STEP = 36


def depth_image(depth: DepthMap) -> Image.Image:
    """Near is bright; missing returns are black."""
    values = depth.depth
    returns = values > 0.0
    out = np.zeros(values.shape, dtype=np.uint8)
    if np.any(returns):
        near, far = float(values[returns].min()), float(values[returns].max())
        span = far - near if far > near else 1.0
        out[returns] = (255.0 - 200.0 * (values[returns] - near) / span).astype(np.uint8)
    return Image.fromarray(out)


def mask_image(depth: DepthMap) -> Image.Image:
    levels = (depth.mask.astype(np.int64) * MASK_LEVEL_STEP) % 256
    levels[depth.mask > 0] = np.maximum(levels[depth.mask > 0], MASK_LEVEL_STEP)
    return Image.fromarray(levels.astype(np.uint8))


def save_previews(directory: Path, depth: DepthMap) -> tuple[Path, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    depth_path = directory / "depth.png"
    mask_path = directory / "mask.png"
    depth_image(depth).save(depth_path, "PNG")
    mask_image(depth).save(mask_path, "PNG")
    return depth_path, mask_path


__all__ = ["depth_image", "mask_image", "save_previews"]
