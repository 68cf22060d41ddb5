"""Shared helpers for option resolution, exit codes, and error reporting."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Mapping, Optional

try:
    from services import AppServices
    from services.dataset_store import DatasetError
    from services.evaluation import NoFeasibleGrasp
    from services.scenes.sampling import PlacementFailure
except ImportError:  # pragma: no cover
    from ..services import AppServices
    from ..services.dataset_store import DatasetError
    from ..services.evaluation import NoFeasibleGrasp
    from ..services.scenes.sampling import PlacementFailure

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_IO = 2
EXIT_MALFORMED = 3
EXIT_NO_FEASIBLE = 4

Handler = Callable[[argparse.Namespace, AppServices, type], int]


def add_common_arguments(parser: argparse.ArgumentParser, threads: bool = True, backend: bool = False) -> None:
    """Every flag defaults to None so that --config values can fill the gaps."""
    parser.add_argument("--config", default=None, help="JSON file whose keys mirror the flag names")
    parser.add_argument("--seed", type=int, default=None)
    if threads:
        parser.add_argument("--threads", type=int, default=None)
    if backend:
        parser.add_argument("--backend", choices=("threads", "celery"), default=None)


def load_run_config(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict):
        raise ValueError(f"Run config {path} must hold a JSON object")
    return payload


def resolve_options(
    args: argparse.Namespace,
    defaults: Mapping[str, Any],
    app_config: type,
) -> argparse.Namespace:
    """Flag > --config file > environment (seed only) > default."""
    file_values = load_run_config(getattr(args, "config", None))
    unknown = sorted(set(file_values) - set(defaults) - {"seed", "threads", "backend"})
    if unknown:
        logger.warning("Ignoring unknown run config keys: %s", ", ".join(unknown))

    def pick(name: str, fallback: Any) -> Any:
        value = getattr(args, name, None)
        if value is None:
            value = file_values.get(name)
        return fallback if value is None else value

    resolved = {name: pick(name, default) for name, default in defaults.items()}
    env_seed = os.getenv("GRASPKIT_SEED")
    explicit_seed = pick("seed", None if env_seed in (None, "") else int(env_seed))
    resolved["seed"] = int(explicit_seed if explicit_seed is not None else getattr(app_config, "SEED", 0))
    resolved["seed_explicit"] = explicit_seed is not None
    resolved["threads"] = max(1, int(pick("threads", getattr(app_config, "THREADS", 1))))
    resolved["backend"] = str(pick("backend", "threads"))
    return argparse.Namespace(**resolved)


def _fail(exc: BaseException, code: int) -> int:
    message = f"{type(exc).__name__}: {exc}"
    logger.error(message)
    print(f"error: {message}", file=sys.stderr)
    return code


def run_command(handler: Handler, args: argparse.Namespace, services: AppServices, app_config: type) -> int:
    try:
        return handler(args, services, app_config)
    except NoFeasibleGrasp as exc:
        return _fail(exc, EXIT_NO_FEASIBLE)
    except (DatasetError, json.JSONDecodeError, KeyError, ValueError) as exc:
        return _fail(exc, EXIT_MALFORMED)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except PlacementFailure as exc:
        return _fail(exc, EXIT_FAILURE)


__all__ = [
    "EXIT_FAILURE",
    "EXIT_IO",
    "EXIT_MALFORMED",
    "EXIT_NO_FEASIBLE",
    "EXIT_OK",
    "add_common_arguments",
    "load_run_config",
    "resolve_options",
    "run_command",
]
