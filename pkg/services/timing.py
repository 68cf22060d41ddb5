"""Timing context helper for stage performance logging."""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Optional


@dataclass
class StageTimer:
    label: str
    elapsed_ms: float = 0.0


@contextmanager
def log_timing(
    label: str, logger: Optional[logging.Logger] = None, level: int = logging.INFO
) -> Iterator[StageTimer]:
    """Measures elapsed time for a block and logs it in milliseconds."""
    timer = StageTimer(label)
    start = time.perf_counter()
    try:
        yield timer
    finally:
        timer.elapsed_ms = (time.perf_counter() - start) * 1000
        (logger or logging.getLogger(__name__)).log(level, "[Timing] %s: %.1f ms", label, timer.elapsed_ms)
