"""Logging helpers: console configuration, run timing and host metadata."""

from __future__ import annotations

import logging
import platform
import time
from typing import Any

import psutil

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def configure_logging(level: int | str = logging.INFO) -> None:
    """Configure root logging in the project's console format."""
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    logging.basicConfig(level=level, format=LOG_FORMAT)


class RunTimer:
    """Context manager that measures elapsed wall time in seconds."""

    def __init__(self, label: str = "run"):
        self.label = label
        self.start: float = 0
        self.elapsed_s: float = 0.0

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *_):
        self.elapsed_s = time.perf_counter() - self.start
        logger.debug("%s finished in %.3f s", self.label, self.elapsed_s)


def default_workers() -> int:
    """Physical core count, falling back to logical cores, then 1."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def system_snapshot() -> dict[str, Any]:
    """Host description recorded in run metadata."""
    mem = psutil.virtual_memory()
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "cpu_physical": psutil.cpu_count(logical=False),
        "cpu_logical": psutil.cpu_count(),
        "memory_total_gb": round(mem.total / (1024**3), 2),
    }
