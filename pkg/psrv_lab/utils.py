"""Shared utilities: trading-time conventions, hashing, output directories."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

# One trading year = 252 days of 6 hours.
DAYS_PER_YEAR: int = 252
HOURS_PER_DAY: float = 6.0


@dataclass(frozen=True)
class YearLayout:
    """Conversion between wall-clock units and model time (years)."""

    days: int = DAYS_PER_YEAR
    hours_per_day: float = HOURS_PER_DAY

    @property
    def seconds_per_year(self) -> float:
        return self.days * self.hours_per_day * 3600.0

    @property
    def seconds_per_day(self) -> float:
        return self.hours_per_day * 3600.0

    def seconds(self, n: float) -> float:
        """``n`` seconds expressed in years."""
        return n / self.seconds_per_year

    def minutes(self, n: float) -> float:
        return self.seconds(60.0 * n)

    def day(self, n: float = 1.0) -> float:
        return n / self.days

    def to_seconds(self, years: float) -> float:
        return years * self.seconds_per_year

    def to_minutes(self, years: float) -> float:
        return self.to_seconds(years) / 60.0

    def to_days(self, years: float) -> float:
        return years * self.days


DEFAULT_LAYOUT = YearLayout()


def stride_between(coarse: float, fine: float, rtol: float = 1e-9) -> int:
    """Integer ratio ``coarse / fine``; raises ValueError when it is not an integer."""
    ratio = coarse / fine
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > rtol * max(1.0, ratio):
        raise ValueError(f"{coarse!r} is not an integer multiple of {fine!r}")
    return stride


def ceil_tol(x: float, rtol: float = 1e-9) -> int:
    """Ceiling that ignores representation error just above an integer."""
    return math.ceil(x - rtol * max(1.0, abs(x)))


def floor_tol(x: float, rtol: float = 1e-9) -> int:
    """Floor that ignores representation error just below an integer."""
    return math.floor(x + rtol * max(1.0, abs(x)))


def canonical_json(payload: Any) -> str:
    """Deterministic JSON rendering used for hashing and metadata."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(payload: Any, algorithm: str = "sha256") -> str:
    """Hex digest of the canonical JSON form of ``payload``."""
    h = hashlib.new(algorithm)
    h.update(canonical_json(payload).encode("utf-8"))
    return h.hexdigest()


def ensure_directory(path: str | Path) -> Path:
    """Create a directory (and parents) if it does not exist. Returns the Path."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
