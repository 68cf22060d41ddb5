"""Long-form Monte-Carlo checks: distance sweep trends, noise scaling, clean round trip, ablation order."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import get_config_class  # noqa: E402
from logging_config import configure_logging  # noqa: E402
from services import AppServices, build_services  # noqa: E402
from services.detector_sim import NoiseConfig, ScaleSource, simulate_detections  # noqa: E402
from services.evaluation import MetricsReport  # noqa: E402
from services.experiments import ablation_run, distance_sweep  # noqa: E402
from services.geometry import Pose, Rotation  # noqa: E402
from services.gripper import Grasp, encode  # noqa: E402
from services.pipeline import ViewCase  # noqa: E402
from services.timing import log_timing  # noqa: E402

logger = logging.getLogger("acceptance")

# Template plane facing the camera: gripper y along the negative optical axis.
FACING = Rotation.from_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]))


def _cases(services: AppServices, scenes: int, seed: int, multi: bool) -> list[ViewCase]:
    generator = services.generator.configured(views=1)
    cases = []
    for index in range(scenes):
        generated = generator.generate(seed, index, multi)
        for view, depth in generated.views:
            cases.append(ViewCase(view, generated.annotation.grasps, depth))
    return cases


def check_sweep(services: AppServices, seeds: int, trials: int) -> bool:
    distances = list(np.linspace(0.3, 2.0, 8))
    sigmas = [0.5, 1.0, 2.0, 4.0]
    rot = np.zeros((len(sigmas), len(distances)))
    trans = np.zeros_like(rot)
    for seed in range(seeds):
        for row in distance_sweep(distances, sigmas, trials, seed, services.intrinsics, services.template):
            i, j = sigmas.index(row.sigma), distances.index(row.distance)
            rot[i, j] += row.mean_rot_err_deg / seeds
            trans[i, j] += row.mean_trans_err_m / seeds
    ok = bool(np.all(np.diff(rot, axis=1) >= 0) and np.all(np.diff(trans, axis=1) >= 0))
    for i, sigma in enumerate(sigmas):
        if sigma >= 1.0:
            ok &= bool(rot[i, -1] >= 2 * rot[i, 0] and trans[i, -1] >= 2 * trans[i, 0])
    logger.info("Sweep rotation error (deg) per sigma:\n%s", np.array2string(rot, precision=3))
    return ok


def check_noise_scaling(services: AppServices, samples: int, sigma: float = 1.0) -> bool:
    ok = True
    batch = 1000
    for scale in (0.5, 1.0, 2.0):
        gt = encode(Grasp(Pose(FACING, (0.0, 0.0, scale)), 0.05), services.intrinsics, services.label_spec.bin_spec,
                    services.template)
        noise = NoiseConfig(sigma_offset=sigma, sigma_raw=None)
        deltas = []
        for run in range(max(1, samples // batch)):
            for det in simulate_detections([gt] * batch, noise.with_seed(run), services.intrinsics, stream=(1,)):
                deltas.append(det.encoding.raw_offsets() - gt.raw_offsets())
        std = float(np.std(np.asarray(deltas)))
        expected = sigma * scale
        logger.info("Scale %.1f m: raw std %.4f px, expected %.4f px", scale, std, expected)
        ok &= abs(std - expected) <= 0.05 * expected
    return ok


def check_round_trip(services: AppServices, scenes: int, seed: int) -> bool:
    results = services.pipeline.process_cases(_cases(services, scenes, seed, multi=True), NoiseConfig())
    report = MetricsReport.merge_all((r.report for r in results), services.thresholds)
    logger.info("Clean round trip: GSR %.2f GCR %.2f OSR %.2f", report.gsr(0), report.gcr(0), report.osr(0))
    return report.gsr(0) == 100.0 and report.gcr(0) == 100.0 and report.osr(0) == 100.0


def check_ablation(services: AppServices, scenes: int, seeds: int) -> bool:
    wins = 0
    for seed in range(seeds):
        noise = NoiseConfig(shrink=0.85, sigma_raw=2.0, sigma_scale_rel=0.05, seed=seed)
        rows = ablation_run(services.pipeline, _cases(services, scenes, seed, multi=True), noise, scenes=scenes)
        gsr = [row.averages[0] for row in rows]
        logger.info("Seed %d ablation GSR: %s", seed, ", ".join(f"{g:.1f}" for g in gsr))
        wins += int(gsr[0] < gsr[1] < gsr[2])
    return wins >= seeds - 1


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="Reduced sizes for a smoke run")
    args = parser.parse_args()

    app_config = get_config_class()
    configure_logging(getattr(app_config, "LOG_LEVEL", "INFO"))
    services = build_services(app_config)
    sizes = {"seeds": 3, "trials": 100, "samples": 10_000, "scenes": 10} if args.quick else {
        "seeds": 10, "trials": 500, "samples": 100_000, "scenes": 100}

    checks = {
        "distance sweep": lambda: check_sweep(services, sizes["seeds"], sizes["trials"]),
        "noise scaling": lambda: check_noise_scaling(services, sizes["samples"]),
        "clean round trip": lambda: check_round_trip(services, 2 * sizes["scenes"], 0),
        "ablation order": lambda: check_ablation(services, sizes["scenes"], sizes["seeds"]),
    }
    failed = []
    for name, check in checks.items():
        with log_timing(name, logger) as timer:
            passed = check()
        print(f"{'PASS' if passed else 'FAIL'} {name} ({timer.elapsed_ms / 1000:.1f} s)")
        if not passed:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
