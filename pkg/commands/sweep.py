"""`sweep`: PnP pose error versus camera distance and keypoint noise, written as CSV."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any

try:
    from commands.utils import EXIT_OK, add_common_arguments, resolve_options
    from paths import REPORT_DIR
    from services import AppServices
    from services.dataset_store import write_csv
    from services.experiments import SWEEP_COLUMNS, distance_sweep, parse_range
    from services.timing import log_timing
except ImportError:  # pragma: no cover
    from .utils import EXIT_OK, add_common_arguments, resolve_options
    from ..paths import REPORT_DIR
    from ..services import AppServices
    from ..services.dataset_store import write_csv
    from ..services.experiments import SWEEP_COLUMNS, distance_sweep, parse_range
    from ..services.timing import log_timing

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction, app_config: type) -> None:
    parser = subparsers.add_parser("sweep", help="Monte-Carlo PnP error sweep over camera distance")
    parser.add_argument("--distances", default=None, help="lo:hi:n or comma list, meters")
    parser.add_argument("--sigmas", default=None, help="lo:hi:n or comma list, pixels")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--out", default=None)
    add_common_arguments(parser)
    parser.set_defaults(handler=handle)


def _values(spec: Any) -> list[float]:
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    return parse_range(str(spec))


def handle(args: argparse.Namespace, services: AppServices, app_config: type) -> int:
    opts = resolve_options(
        args,
        {
            "distances": "0.3:2.0:8",
            "sigmas": "0.5,1,2,4",
            "trials": 500,
            "out": str(REPORT_DIR / "sweep.csv"),
        },
        app_config,
    )
    distances = _values(opts.distances)
    sigmas = _values(opts.sigmas)
    with log_timing(f"sweep {len(distances)}x{len(sigmas)} cells", logger):
        rows = distance_sweep(
            distances, sigmas, int(opts.trials), opts.seed, services.intrinsics, services.template, opts.threads
        )
    write_csv(Path(opts.out), (row.to_row() for row in rows), SWEEP_COLUMNS)
    logger.info("Wrote %d sweep rows to %s", len(rows), opts.out)
    return EXIT_OK
