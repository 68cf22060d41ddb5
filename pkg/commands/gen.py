"""`gen`: synthesize scenes, render their views, and write a dataset directory."""

from __future__ import annotations

import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

try:
    from commands.utils import EXIT_OK, add_common_arguments, resolve_options
    from paths import DATASET_DIR
    from services import AppServices
    from services.dataset_store import SceneRecord
    from services.timing import log_timing
    from tasks import generate_scene_task, set_services
except ImportError:  # pragma: no cover
    from .utils import EXIT_OK, add_common_arguments, resolve_options
    from ..paths import DATASET_DIR
    from ..services import AppServices
    from ..services.dataset_store import SceneRecord
    from ..services.timing import log_timing
    from ..tasks import generate_scene_task, set_services

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


def register(subparsers: argparse._SubParsersAction, app_config: type) -> None:
    parser = subparsers.add_parser("gen", help="Generate a synthetic tabletop dataset")
    parser.add_argument("--mode", choices=("single", "multi"), default=None)
    parser.add_argument("--scenes", type=int, default=None)
    parser.add_argument("--views", type=int, default=None)
    parser.add_argument("--split", choices=SPLITS, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--labels", action="store_true", default=None, help="Also dump label tensors per view")
    parser.add_argument("--previews", action="store_true", default=None, help="Also write depth/mask PNGs")
    add_common_arguments(parser, backend=True)
    parser.set_defaults(handler=handle)


def density_for(split: str, app_config: type) -> int:
    if split == "test":
        return int(getattr(app_config, "TEST_DENSITY", 12))
    return int(getattr(app_config, "TRAIN_DENSITY", 6))


def handle(args: argparse.Namespace, services: AppServices, app_config: type) -> int:
    opts = resolve_options(
        args,
        {
            "mode": "single",
            "scenes": 10,
            "views": int(getattr(app_config, "VIEWS_PER_SCENE", 5)),
            "split": "train",
            "out": str(DATASET_DIR / "default"),
            "labels": False,
            "previews": False,
        },
        app_config,
    )
    if opts.scenes < 0:
        raise ValueError("--scenes must be non-negative")
    if opts.split not in SPLITS:
        raise ValueError(f"Unknown split {opts.split!r}")
    multi = opts.mode == "multi"
    density = density_for(opts.split, app_config)
    store = services.dataset(Path(opts.out))
    store.root.mkdir(parents=True, exist_ok=True)

    with log_timing(f"gen {opts.scenes} scenes", logger):
        if opts.backend == "celery":
            set_services(services)
            pending = [
                generate_scene_task.delay(
                    str(store.root), opts.seed, index, multi, opts.views, density, bool(opts.labels), bool(opts.previews)
                )
                for index in range(opts.scenes)
            ]
            records = [SceneRecord.from_json(task.get()) for task in pending]
        else:
            generator = services.generator.configured(views=opts.views, density=density)

            def run(index: int) -> SceneRecord:
                return generator.write(store, opts.seed, index, multi, bool(opts.labels), bool(opts.previews))

            if opts.threads <= 1:
                records = [run(index) for index in range(opts.scenes)]
            else:
                with ThreadPoolExecutor(max_workers=opts.threads) as executor:
                    records = list(executor.map(run, range(opts.scenes)))

    manifest = store.write_manifest(
        {
            "mode": opts.mode,
            "split": opts.split,
            "density": density,
            "views": opts.views,
            "seed": opts.seed,
            "labels": bool(opts.labels),
            "camera": services.intrinsics.to_json(),
        },
        records,
    )
    logger.info(
        "Wrote %d scenes (%d views, %d grasps) to %s",
        len(records),
        sum(r.views for r in records),
        sum(r.grasps for r in records),
        manifest,
    )
    return EXIT_OK
