"""Filesystem paths and directory setup for runtime data."""

from __future__ import annotations

from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent
RUNTIME_DIR = BASE_DIR / "runtime"
DATASET_DIR = RUNTIME_DIR / "datasets"
REPORT_DIR = RUNTIME_DIR / "reports"


def ensure_directories() -> None:
    DATASET_DIR.mkdir(parents=True, exist_ok=True)
    REPORT_DIR.mkdir(parents=True, exist_ok=True)
