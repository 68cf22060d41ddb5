"""`pipeline`: simulate detections on a stored dataset, recover grasps, and report metrics."""

from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path
from typing import Sequence

try:
    from commands.utils import EXIT_OK, add_common_arguments, resolve_options
    from paths import REPORT_DIR
    from services import AppServices
    from services.dataset_store import DatasetStore, write_csv, write_report
    from services.detector_sim import NoiseConfig, ScaleSource, load_noise
    from services.evaluation import MetricsReport
    from services.timing import log_timing
    from tasks import evaluate_view_task, set_services
except ImportError:  # pragma: no cover
    from .utils import EXIT_OK, add_common_arguments, resolve_options
    from ..paths import REPORT_DIR
    from ..services import AppServices
    from ..services.dataset_store import DatasetStore, write_csv, write_report
    from ..services.detector_sim import NoiseConfig, ScaleSource, load_noise
    from ..services.evaluation import MetricsReport
    from ..services.timing import log_timing
    from ..tasks import evaluate_view_task, set_services

logger = logging.getLogger(__name__)

SPLIT_COLUMNS = (
    "split",
    "threshold",
    "gsr",
    "gcr",
    "osr",
    "n_predictions",
    "n_gt",
    "n_objects",
    "mean_translation_error_m",
    "mean_rotation_error_deg",
)


def register(subparsers: argparse._SubParsersAction, app_config: type) -> None:
    parser = subparsers.add_parser("pipeline", help="Evaluate simulated detections on a dataset")
    parser.add_argument("--dataset", default=None)
    parser.add_argument("--noise", default=None, help="Preset name or NoiseConfig JSON file")
    parser.add_argument("--scale-source", dest="scale_source", choices=[s.value for s in ScaleSource], default=None)
    parser.add_argument("--out", default=None)
    add_common_arguments(parser, backend=True)
    parser.set_defaults(handler=handle)


def seeded_noise(spec: str, opts: argparse.Namespace) -> NoiseConfig:
    """An explicit seed (flag, config, or environment) replaces the noise file's own."""
    noise = load_noise(spec)
    return noise.with_seed(opts.seed) if opts.seed_explicit else noise


def evaluate_dataset(
    services: AppServices,
    store: DatasetStore,
    noise: NoiseConfig,
    scale_source: ScaleSource,
    threads: int = 1,
    backend: str = "threads",
) -> list[tuple[bool, MetricsReport]]:
    """(multi, report) per stored view in manifest order."""
    records = store.records()
    if backend == "celery":
        set_services(services)
        pending = [
            (record.multi, evaluate_view_task.delay(str(store.root), record.index, v, noise.to_json(), scale_source.value))
            for record in records
            for v in range(record.views)
        ]
        return [(multi, MetricsReport.from_json(task.get())) for multi, task in pending]
    multi_by_index = {record.index: record.multi for record in records}
    cases = store.cases(with_depth=scale_source is ScaleSource.CENTER_DEPTH)
    results = services.pipeline.process_cases(cases, noise, scale_source, threads)
    return [(multi_by_index[case.view.index], result.report) for case, result in zip(cases, results)]


def split_rows(per_view: Sequence[tuple[bool, MetricsReport]], services: AppServices) -> list[dict]:
    rows: list[dict] = []
    for split, wanted in (("single", False), ("multi", True)):
        reports = [report for multi, report in per_view if multi is wanted]
        if reports:
            rows.extend(MetricsReport.merge_all(reports, services.thresholds).csv_rows(split))
    return rows


def handle(args: argparse.Namespace, services: AppServices, app_config: type) -> int:
    opts = resolve_options(
        args,
        {
            "dataset": None,
            "noise": "clean",
            "scale_source": ScaleSource.PREDICTED.value,
            "out": str(REPORT_DIR / "report.json"),
        },
        app_config,
    )
    if not opts.dataset:
        raise ValueError("--dataset is required")
    store = services.dataset(Path(opts.dataset))
    manifest = store.read_manifest()
    noise = seeded_noise(opts.noise, opts)
    scale_source = ScaleSource(opts.scale_source)

    with log_timing("pipeline", logger):
        per_view = evaluate_dataset(services, store, noise, scale_source, opts.threads, opts.backend)
    report = MetricsReport.merge_all((r for _, r in per_view), services.thresholds)
    report = replace(
        report,
        meta={
            "noise": noise.to_json(),
            "scale_source": scale_source.value,
            "views": len(per_view),
            "dataset_seed": manifest.get("seed"),
            "dataset_mode": manifest.get("mode"),
            "dataset_split": manifest.get("split"),
        },
    )
    out = Path(opts.out)
    write_report(out, report)
    write_csv(out.with_suffix(".csv"), split_rows(per_view, services), SPLIT_COLUMNS)
    gsr, gcr, osr = report.averaged()
    logger.info("GSR %.1f GCR %.1f OSR %.1f over %d views", gsr, gcr, osr, len(per_view))
    return EXIT_OK
