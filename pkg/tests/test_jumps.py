"""Unit tests for the jump-day window rule.

Tests cover:
- Empty calendars leave the target window untouched
- Jumps on the estimation day or the day before skip the day
- Older jumps shorten the window, growing with each instant
- A jump two days back caps the window at two days
- Jumps beyond the lookback are ignored
- Calendar coverage and argument errors
"""

import numpy as np
import pytest

TAU = 10


def calendar(*jumps, covered=range(0, 20)):
    from harness.jumps import JumpCalendar

    return JumpCalendar.from_days(jumps, covered)


class TestJumpCalendar:
    """Tests for JumpCalendar."""

    def test_from_days(self):
        cal = calendar(3, 7, covered=range(10))
        assert cal.jump_days == [3, 7]
        assert cal.has_jump(3) is True
        assert cal.has_jump(4) is False
        assert cal.is_empty is False

    def test_jump_outside_coverage_is_dropped(self):
        cal = calendar(3, 30, covered=range(10))
        assert cal.jump_days == [3]

    def test_empty_calendar_has_no_jumps(self):
        from harness.jumps import JumpCalendar

        cal = JumpCalendar()
        assert cal.is_empty
        assert cal.has_jump(123) is False

    def test_uncovered_day(self):
        from psrv_lab.errors import CalendarCoverageError

        with pytest.raises(CalendarCoverageError, match="day 12"):
            calendar(covered=range(10)).has_jump(12)


class TestAdjustWindow:
    """Tests for adjust_window_for_jumps."""

    def test_empty_calendar(self):
        from harness.jumps import JumpCalendar, adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 2.5, JumpCalendar(), 0.1, 4)
        assert plan.skip is False
        np.testing.assert_array_equal(plan.windows, [2.5] * 4)

    @pytest.mark.parametrize("jump_day", [TAU - 1, TAU])
    def test_recent_jump_skips(self, jump_day):
        from harness.jumps import adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 2.5, calendar(jump_day), 0.1, 5)
        assert plan.skip is True
        assert plan.reason == "jump"
        assert len(plan.windows) == 0

    def test_older_jump_shortens(self):
        from harness.jumps import adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 2.5, calendar(TAU - 3), 0.1, 5)
        assert plan.skip is False
        np.testing.assert_allclose(plan.windows, [2.0, 2.1, 2.2, 2.3, 2.4])

    def test_shortened_window_is_capped_at_target(self):
        from harness.jumps import adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 2.5, calendar(TAU - 3), 0.25, 4)
        np.testing.assert_allclose(plan.windows, [2.0, 2.25, 2.5, 2.5])

    def test_jump_two_days_back_caps_at_two_days(self):
        from harness.jumps import adjust_window_for_jumps

        delta = 1.0 / 72
        plan = adjust_window_for_jumps(TAU, 2.5, calendar(TAU - 2), delta, 100)
        assert plan.windows[0] == 1.0
        assert plan.windows[1] == pytest.approx(1.0 + delta)
        assert plan.windows.max() == 2.0
        np.testing.assert_allclose(plan.windows[72:], 2.0)

    def test_jump_two_days_back_respects_smaller_target(self):
        from harness.jumps import adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 1.5, calendar(TAU - 2), 0.25, 4)
        np.testing.assert_allclose(plan.windows, [1.0, 1.25, 1.5, 1.5])

    def test_most_recent_jump_wins(self):
        from harness.jumps import adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 3.0, calendar(TAU - 4, TAU - 2), 0.5, 2)
        np.testing.assert_allclose(plan.windows, [1.0, 1.5])

    def test_jump_beyond_lookback_is_ignored(self):
        from harness.jumps import adjust_window_for_jumps

        plan = adjust_window_for_jumps(TAU, 2.5, calendar(TAU - 6), 0.1, 3)
        assert plan.skip is False
        np.testing.assert_array_equal(plan.windows, [2.5] * 3)

    def test_lookback_needs_coverage(self):
        from harness.jumps import adjust_window_for_jumps
        from psrv_lab.errors import CalendarCoverageError

        with pytest.raises(CalendarCoverageError):
            adjust_window_for_jumps(TAU, 2.5, calendar(covered=range(TAU - 1, TAU + 1)), 0.1, 3)

    @pytest.mark.parametrize("args", [(0.0, 0.1, 3), (2.5, 0.0, 3), (2.5, 0.1, 0)])
    def test_bad_arguments(self, args):
        from harness.jumps import adjust_window_for_jumps
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError):
            adjust_window_for_jumps(TAU, args[0], calendar(), args[1], args[2])
