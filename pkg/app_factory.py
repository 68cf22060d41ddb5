"""Application factory that wires configuration, logging, services, and commands."""

from __future__ import annotations

import argparse
import logging
import os
from typing import Optional, Sequence

from dotenv import load_dotenv

if os.getenv("LOAD_DOTENV", "1").lower() == "1":
    load_dotenv(os.getenv("DOTENV_FILE") or None)

try:
    from commands import register_commands
    from commands.utils import run_command
    from config import BaseConfig, get_config_class
    from logging_config import configure_logging
    from paths import ensure_directories
    from services import AppServices, build_services
except ImportError:  # pragma: no cover
    from .commands import register_commands
    from .commands.utils import run_command
    from .config import BaseConfig, get_config_class
    from .logging_config import configure_logging
    from .paths import ensure_directories
    from .services import AppServices, build_services

logger = logging.getLogger(__name__)


class GraspkitApp:
    """Parsed command surface bound to one configuration and its services."""

    def __init__(self, config: type[BaseConfig], services: AppServices, parser: argparse.ArgumentParser) -> None:
        self._config = config
        self._services = services
        self._parser = parser

    @property
    def config(self) -> type[BaseConfig]:
        return self._config

    @property
    def services(self) -> AppServices:
        return self._services

    @property
    def parser(self) -> argparse.ArgumentParser:
        return self._parser

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        args = self._parser.parse_args(argv)
        handler = getattr(args, "handler", None)
        if handler is None:
            self._parser.print_help()
            return 2
        return run_command(handler, args, self._services, self._config)


def create_app(config_class: type[BaseConfig] | None = None) -> GraspkitApp:
    app_config = config_class or get_config_class()

    configure_logging(getattr(app_config, "LOG_LEVEL", "INFO"))
    ensure_directories()

    services = build_services(app_config)
    parser = argparse.ArgumentParser(
        prog="graspkit",
        description="Keypoint-based 6-DoF grasp synthesis: scene generation, recovery, and evaluation.",
    )
    register_commands(parser, app_config)

    if getattr(app_config, "ASYNC_TASKS_ENABLED", False):
        logger.info("Celery backend targets broker %s", getattr(app_config, "CELERY_BROKER_URL", ""))
    return GraspkitApp(app_config, services, parser)
