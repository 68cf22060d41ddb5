"""Subcommand registration for the graspkit command line."""

from __future__ import annotations

import argparse

from . import ablate, gen, pipeline, selection, sweep


def register_commands(parser: argparse.ArgumentParser, app_config: type) -> None:
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    for module in (gen, sweep, pipeline, ablate, selection):
        module.register(subparsers, app_config)
