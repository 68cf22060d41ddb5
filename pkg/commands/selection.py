"""`select`: rank the recovered grasps of one view and pick the first feasible one."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

try:
    from commands.pipeline import seeded_noise
    from commands.utils import EXIT_OK, add_common_arguments, resolve_options
    from paths import REPORT_DIR
    from services import AppServices
    from services.dataset_store import dump_json
    from services.detector_sim import ScaleSource
    from services.evaluation import Candidate, Combiner, feasibility_filter, score_and_rank
    from services.gripper import TablePlane
except ImportError:  # pragma: no cover
    from .pipeline import seeded_noise
    from .utils import EXIT_OK, add_common_arguments, resolve_options
    from ..paths import REPORT_DIR
    from ..services import AppServices
    from ..services.dataset_store import dump_json
    from ..services.detector_sim import ScaleSource
    from ..services.evaluation import Candidate, Combiner, feasibility_filter, score_and_rank
    from ..services.gripper import TablePlane

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction, app_config: type) -> None:
    parser = subparsers.add_parser("select", help="Pick one executable grasp for a stored view")
    parser.add_argument("--dataset", default=None)
    parser.add_argument("--scene", type=int, default=None)
    parser.add_argument("--view", type=int, default=None)
    parser.add_argument("--noise", default=None, help="Preset name or NoiseConfig JSON file")
    parser.add_argument("--scale-source", dest="scale_source", choices=[s.value for s in ScaleSource], default=None)
    parser.add_argument("--combiner", choices=[c.value for c in Combiner], default=None)
    parser.add_argument("--penalty", type=float, default=None)
    parser.add_argument("--min-points", dest="min_points", type=int, default=None)
    parser.add_argument("--out", default=None)
    add_common_arguments(parser, threads=False)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, services: AppServices, app_config: type) -> int:
    opts = resolve_options(
        args,
        {
            "dataset": None,
            "scene": 0,
            "view": 0,
            "noise": "clean",
            "scale_source": ScaleSource.PREDICTED.value,
            "combiner": Combiner.LITERAL.value,
            "penalty": float(getattr(app_config, "SCORE_PENALTY", 0.05)),
            "min_points": int(getattr(app_config, "FEASIBILITY_MIN_POINTS", 10)),
            "out": str(REPORT_DIR / "selection.json"),
        },
        app_config,
    )
    if not opts.dataset:
        raise ValueError("--dataset is required")
    store = services.dataset(Path(opts.dataset))
    scene, depth = store.load_view(int(opts.scene), int(opts.view))
    grasps = store.load_grasps(int(opts.scene))
    cloud = store.load_cloud(int(opts.scene))

    result = services.pipeline.process_view(scene, grasps, seeded_noise(opts.noise, opts), opts.scale_source, depth)
    candidates = [
        Candidate(r.grasp, r.detection.encoding.confidence, r.reprojection_error) for r in result.recoveries
    ]
    ranked = score_and_rank(candidates, opts.combiner, float(opts.penalty))

    extrinsic = scene.camera.extrinsic
    rank, chosen = feasibility_filter(
        [candidate.grasp for candidate, _ in ranked],
        extrinsic.apply(cloud.points),
        TablePlane.from_extrinsic(extrinsic),
        services.geometry,
        int(opts.min_points),
    )
    candidate, score = ranked[rank]
    dump_json(
        Path(opts.out),
        {
            "scene": int(opts.scene),
            "view": int(opts.view),
            "rank": rank,
            "candidates": len(ranked),
            "score": score.score,
            "confidence": score.confidence,
            "reprojection_error": score.reprojection_error,
            "combiner": Combiner(opts.combiner).value,
            "grasp_camera": chosen.to_json(),
            "grasp_world": chosen.transformed(extrinsic.inverse()).to_json(),
        },
    )
    logger.info("Selected candidate %d of %d for scene %s view %s", rank, len(ranked), opts.scene, opts.view)
    return EXIT_OK
