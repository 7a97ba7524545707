"""Window shortening around days flagged as containing price jumps.

Days are integer indices; day ``d`` covers [d, d + 1) in day units and the
estimation day ``tau`` starts at its own index.  The rule, for a target window
``w_target`` (days) and an estimation instant tau + i * Delta:

- a jump on day tau - 1 or on day tau: the day is skipped;
- otherwise, with j the most recent jump day before tau - 1, the window may not
  reach back past the end of day j: W_i = min(tau - j - 1 + i * Delta, w_target);
  a jump on day tau - 2 also caps W_i at 2 days;
- no jump in the lookback: W_i = w_target.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from psrv_lab.errors import CalendarCoverageError, ConfigError

logger = logging.getLogger(__name__)

# cap for a jump on day tau - 2
DAY_BEFORE_JUMP_CAP_DAYS = 2.0


@dataclass(frozen=True)
class JumpCalendar:
    """Per-day jump flags keyed by day index.  An empty calendar means no jumps."""

    flags: dict[int, bool] = field(default_factory=dict)

    @classmethod
    def from_days(cls, jump_days: Iterable[int], covered: Iterable[int]) -> JumpCalendar:
        jumps = set(jump_days)
        return cls({d: d in jumps for d in covered})

    @property
    def is_empty(self) -> bool:
        return not self.flags

    @property
    def jump_days(self) -> list[int]:
        return sorted(d for d, flag in self.flags.items() if flag)

    def has_jump(self, day: int) -> bool:
        if self.is_empty:
            return False
        if day not in self.flags:
            raise CalendarCoverageError(f"jump calendar does not cover day {day}")
        return self.flags[day]


@dataclass(frozen=True)
class WindowPlan:
    """Per-instant windows in days, or a skip signal with its reason."""

    skip: bool
    windows: np.ndarray
    reason: str = ""


def adjust_window_for_jumps(
    tau_day: int,
    w_target: float,
    calendar: JumpCalendar,
    delta_grid: float,
    n_instants: int,
) -> WindowPlan:
    """Window length (days) at each instant tau + i * delta_grid, i < n_instants."""
    if not w_target > 0 or not delta_grid > 0 or n_instants < 1:
        raise ConfigError(
            f"need w_target > 0, delta_grid > 0, n_instants >= 1; got {w_target}, {delta_grid}, {n_instants}"
        )
    offsets = delta_grid * np.arange(n_instants)
    if calendar.is_empty:
        return WindowPlan(False, np.full(n_instants, float(w_target)))

    if calendar.has_jump(tau_day - 1) or calendar.has_jump(tau_day):
        logger.debug("Day %d skipped: jump in [tau - 1, tau + 1)", tau_day)
        return WindowPlan(True, np.empty(0), reason="jump")

    lookback = math.ceil(w_target) + 1
    for day in range(tau_day - 2, tau_day - lookback - 1, -1):
        if calendar.has_jump(day):
            reach = tau_day - day - 1
            cap = min(w_target, DAY_BEFORE_JUMP_CAP_DAYS) if reach == 1 else w_target
            return WindowPlan(False, np.minimum(reach + offsets, cap))
    return WindowPlan(False, np.full(n_instants, float(w_target)))
