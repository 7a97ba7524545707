"""Exception hierarchy for the PSRV laboratory.

Two families:

- ``ConfigError``: the request itself is invalid (parameters, rates, horizons).
- ``DataError``: the request is fine but the data cannot support it (coverage,
  calibration, degenerate regressions, CSV problems).

The CLI maps the first family to exit code 2 and the second to exit code 3.
"""

from __future__ import annotations


class PsrvLabError(Exception):
    """Base class for every error raised by psrv_lab and harness."""


# ---------------------------------------------------------------------------
# Configuration errors
# ---------------------------------------------------------------------------


class ConfigError(PsrvLabError, ValueError):
    """Invalid configuration or arguments."""


class ParameterError(ConfigError):
    """Model parameters violate their invariants (Feller, positivity, ...)."""


class RateConstraintError(ConfigError):
    """Rate exponents (b, c) fall outside the branch a formula is valid for."""


class DegenerateHorizonError(ConfigError):
    """The horizon holds no complete spot-variance increment (floor(h / Delta) = 0)."""


# ---------------------------------------------------------------------------
# Data errors
# ---------------------------------------------------------------------------


class DataError(PsrvLabError):
    """The data cannot support the requested computation."""


class CoverageError(DataError):
    """An estimation window leaves the domain of the path."""


class CalibrationError(DataError):
    """Noise-to-signal calibration is impossible on the given path."""


class DegeneracyError(DataError):
    """Singular regression design or a zero vol-of-vol estimate where one is required."""


class CalendarCoverageError(DataError):
    """The jump calendar does not cover a day the window rule needs."""


class IngestError(DataError):
    """A price file could not be ingested."""

    def __init__(self, message: str, row: int | None = None) -> None:
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
