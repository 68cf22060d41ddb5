"""Celery tasks that generate scenes and evaluate views of a stored dataset."""

from __future__ import annotations

import logging
from pathlib import Path

if __package__:
    from .celery_app import EVAL_QUEUE, SCENES_QUEUE, celery_app
    from .config import get_config_class
    from .services import AppServices, build_services
    from .services.detector_sim import NoiseConfig
else:
    from celery_app import EVAL_QUEUE, SCENES_QUEUE, celery_app
    from config import get_config_class
    from services import AppServices, build_services
    from services.detector_sim import NoiseConfig

logger = logging.getLogger(__name__)

_services: AppServices | None = None


def _get_services() -> AppServices:
    global _services
    if _services is None:
        _services = build_services(get_config_class())
    return _services


def set_services(services: AppServices | None) -> None:
    """Lets an in-process caller share its configured services with eager tasks."""
    global _services
    _services = services


@celery_app.task(bind=True, name="graspkit.generate_scene", queue=SCENES_QUEUE)
def generate_scene_task(
    self,
    root: str,
    seed: int,
    index: int,
    multi: bool,
    views: int,
    density: int,
    with_labels: bool = False,
    previews: bool = False,
) -> dict:
    services = _get_services()
    generator = services.generator.configured(views=views, density=density)
    try:
        record = generator.write(services.dataset(Path(root)), seed, index, multi, with_labels, previews)
    except Exception:
        logger.exception("Scene %d generation failed", index)
        raise
    return record.to_json()


@celery_app.task(bind=True, name="graspkit.evaluate_view", queue=EVAL_QUEUE)
def evaluate_view_task(
    self,
    root: str,
    index: int,
    view: int,
    noise: dict,
    scale_source: str,
) -> dict:
    services = _get_services()
    store = services.dataset(Path(root))
    scene, depth = store.load_view(index, view)
    result = services.pipeline.process_view(
        scene, store.load_grasps(index), NoiseConfig.from_json(noise), scale_source, depth
    )
    return result.report.to_json()


__all__ = ["evaluate_view_task", "generate_scene_task", "set_services"]
