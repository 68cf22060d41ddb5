"""`ablate`: scale-source and offset-normalization ablation over a stored dataset."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

try:
    from commands.pipeline import seeded_noise
    from commands.utils import EXIT_OK, add_common_arguments, resolve_options
    from paths import REPORT_DIR
    from services import AppServices
    from services.dataset_store import write_csv
    from services.experiments import ABLATION_COLUMNS, ablation_run
    from services.timing import log_timing
except ImportError:  # pragma: no cover
    from .pipeline import seeded_noise
    from .utils import EXIT_OK, add_common_arguments, resolve_options
    from ..paths import REPORT_DIR
    from ..services import AppServices
    from ..services.dataset_store import write_csv
    from ..services.experiments import ABLATION_COLUMNS, ablation_run
    from ..services.timing import log_timing

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction, app_config: type) -> None:
    parser = subparsers.add_parser("ablate", help="Compare scale sources and offset normalization")
    parser.add_argument("--dataset", default=None)
    parser.add_argument("--noise", default=None, help="Preset name or NoiseConfig JSON file")
    parser.add_argument("--out", default=None)
    add_common_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, services: AppServices, app_config: type) -> int:
    opts = resolve_options(
        args,
        {"dataset": None, "noise": "domain_shift", "out": str(REPORT_DIR / "ablation.csv")},
        app_config,
    )
    if not opts.dataset:
        raise ValueError("--dataset is required")
    store = services.dataset(Path(opts.dataset))
    records = store.records()
    cases = store.cases(with_depth=False)
    noise = seeded_noise(opts.noise, opts)
    with log_timing(f"ablation over {len(cases)} views", logger):
        rows = ablation_run(services.pipeline, cases, noise, opts.threads, scenes=len(records))
    write_csv(Path(opts.out), (row.to_row() for row in rows), ABLATION_COLUMNS)
    return EXIT_OK
