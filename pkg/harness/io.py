"""CSV input and output: price ingestion, jump calendars, result tables and metadata."""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from psrv_lab.errors import ConfigError, IngestError
from psrv_lab.sde import LogPricePath, PathGrid
from psrv_lab.utils import DEFAULT_LAYOUT, YearLayout, ensure_directory, stride_between

from .config import IngestSettings
from .jumps import JumpCalendar

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
TRUE_FLAGS = {"1", "true", "yes", "y", "t"}
FALSE_FLAGS = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class IngestedSeries:
    """Resampled prices plus the model-time log-price path built from them.

    ``timestamps`` and ``prices`` hold the resampled series exactly as
    ``emit_csv`` writes it.  ``path`` concatenates the sessions on a uniform
    model grid of ``steps_per_day`` steps per day; ``dates[d]`` is the calendar
    date of model day ``d``.
    """

    timestamps: pd.DatetimeIndex
    prices: np.ndarray
    path: LogPricePath
    dates: list[dt.date]
    steps_per_day: int
    mesh_seconds: float
    filled: int
    n_ticks: int

    @property
    def n_days(self) -> int:
        return len(self.dates)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _read_frame(path: str | Path, columns: list[str]) -> pd.DataFrame:
    p = Path(path)
    if not p.is_file():
        raise IngestError(f"file not found: {p}")
    try:
        df = pd.read_csv(p, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise IngestError(f"{p} is empty") from exc
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise IngestError(f"{p} lacks column(s) {', '.join(missing)}")
    if df.empty:
        raise IngestError(f"{p} holds no data rows")
    return df


def _first_bad(mask: np.ndarray) -> int | None:
    bad = np.flatnonzero(mask)
    return int(bad[0]) + 1 if bad.size else None


def parse_timestamps(raw: pd.Series) -> pd.DatetimeIndex:
    """ISO-8601 strings or epoch seconds, as naive UTC timestamps.

    Raises IngestError naming the first unparsable data row (1-based, header excluded).
    """
    text = raw.fillna("").str.strip()
    numeric = pd.to_numeric(text, errors="coerce")
    if numeric.notna().all():
        stamps = pd.to_datetime(numeric, unit="s", errors="coerce")
    else:
        stamps = pd.to_datetime(text, errors="coerce", format="ISO8601", utc=True).dt.tz_convert(None)
    row = _first_bad(stamps.isna().to_numpy())
    if row is not None:
        raise IngestError(f"unparsable timestamp {text.iloc[row - 1]!r}", row=row)
    return pd.DatetimeIndex(stamps)


def parse_prices(raw: pd.Series) -> np.ndarray:
    values = pd.to_numeric(raw.fillna("").str.strip(), errors="coerce").to_numpy(dtype=float)
    row = _first_bad(~np.isfinite(values))
    if row is not None:
        raise IngestError(f"unparsable price {raw.iloc[row - 1]!r}", row=row)
    row = _first_bad(values <= 0)
    if row is not None:
        raise IngestError(f"price must be positive, got {values[row - 1]!r}", row=row)
    return values


def _check_increasing(stamps: pd.DatetimeIndex) -> None:
    ns = stamps.asi8
    row = _first_bad(np.diff(ns) <= 0)
    if row is not None:
        raise IngestError("timestamps must be strictly increasing", row=row + 1)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def _last_tick(ticks: pd.Series, grid: pd.DatetimeIndex) -> tuple[np.ndarray, int]:
    """Last tick at or before each grid point; the count of points with no new tick since the previous one."""
    values = ticks.reindex(grid, method="ffill")
    pos = np.searchsorted(ticks.index.asi8, grid.asi8, side="right")
    fresh = np.diff(np.concatenate([[0], pos])) > 0
    if values.isna().any():
        # grid points before the first tick of a session take its opening tick
        values = values.bfill()
    return values.to_numpy(dtype=float), int((~fresh).sum())


def _time_of_day(text: str) -> pd.Timedelta:
    parts = text.strip().split(":")
    if len(parts) == 2:
        parts.append("00")
    return pd.Timedelta(":".join(parts))


def _session_bounds(settings: IngestSettings) -> tuple[pd.Timedelta, pd.Timedelta]:
    try:
        start = _time_of_day(settings.session_start)
        end = _time_of_day(settings.session_end)
    except ValueError as exc:
        raise ConfigError(f"bad session times {settings.session_start!r}-{settings.session_end!r}") from exc
    if end <= start:
        raise ConfigError("session_end must come after session_start")
    return start, end


def ingest_csv(
    path: str | Path,
    settings: IngestSettings | None = None,
    layout: YearLayout = DEFAULT_LAYOUT,
) -> IngestedSeries:
    """Read ``timestamp,price`` ticks and resample them to a uniform mesh by last-tick interpolation."""
    settings = settings or IngestSettings()
    df = _read_frame(path, [settings.timestamp_column, settings.price_column])
    stamps = parse_timestamps(df[settings.timestamp_column])
    prices = parse_prices(df[settings.price_column])
    _check_increasing(stamps)
    ticks = pd.Series(prices, index=stamps)
    mesh = pd.Timedelta(seconds=settings.mesh_seconds)

    if settings.session_start is None:
        n_steps = int(np.ceil((stamps[-1] - stamps[0]) / mesh))
        if n_steps < 1:
            raise IngestError(f"{path} spans less than one {settings.mesh_seconds:g}s step")
        grid = pd.DatetimeIndex([stamps[0] + j * mesh for j in range(n_steps + 1)])
        values, filled = _last_tick(ticks, grid)
        try:
            steps_per_day = stride_between(layout.seconds_per_day, settings.mesh_seconds)
        except ValueError as exc:
            raise ConfigError(f"mesh {settings.mesh_seconds:g}s does not divide the trading day") from exc
        log_path = LogPricePath(PathGrid.seconds(settings.mesh_seconds, n_steps, 0.0, layout), np.log(values))
        dates = [grid[j].date() for j in range(0, n_steps, steps_per_day)]
        series = IngestedSeries(grid, values, log_path, dates, steps_per_day, settings.mesh_seconds, filled, len(ticks))
    else:
        series = _ingest_sessions(ticks, settings, layout, mesh)

    if series.filled:
        logger.warning("%s: %d of %d grid points carried the previous tick forward", path, series.filled, len(series.prices))
    logger.info("Ingested %s: %d ticks -> %d points over %d days", path, series.n_ticks, len(series.prices), series.n_days)
    return series


def _ingest_sessions(
    ticks: pd.Series, settings: IngestSettings, layout: YearLayout, mesh: pd.Timedelta
) -> IngestedSeries:
    start, end = _session_bounds(settings)
    steps = stride_between((end - start).total_seconds(), settings.mesh_seconds)
    grids, blocks, dates = [], [], []
    filled = 0
    for day, day_ticks in ticks.groupby(ticks.index.normalize()):
        open_, close = day + start, day + end
        in_session = day_ticks[(day_ticks.index >= open_) & (day_ticks.index <= close)]
        if in_session.empty:
            logger.warning("No ticks inside the session on %s; day dropped", day.date())
            continue
        grid = pd.DatetimeIndex([open_ + j * mesh for j in range(steps + 1)])
        values, n_filled = _last_tick(in_session, grid)
        grids.append(grid)
        blocks.append(values)
        dates.append(day.date())
        filled += n_filled
    if not blocks:
        raise IngestError("no session holds any tick")

    logs = [np.log(b) for b in blocks]
    pieces = [logs[0]]
    level = logs[0][-1]
    for block in logs[1:]:
        if settings.drop_overnight:
            moved = level + (block[1:] - block[0])
        else:
            moved = block[1:]
        pieces.append(moved)
        level = moved[-1]
    values = np.concatenate(pieces)
    grid = PathGrid(0.0, layout.day() / steps, steps * len(blocks))
    return IngestedSeries(
        timestamps=pd.DatetimeIndex(np.concatenate([g.asi8 for g in grids])),
        prices=np.concatenate(blocks),
        path=LogPricePath(grid, values),
        dates=dates,
        steps_per_day=steps,
        mesh_seconds=settings.mesh_seconds,
        filled=filled,
        n_ticks=len(ticks),
    )


def series_from_path(
    path: LogPricePath,
    steps_per_day: int,
    mesh_seconds: float,
    first_date: dt.date = dt.date(2020, 1, 1),
) -> IngestedSeries:
    """Wrap a simulated log-price path as if it had been ingested (one business day per model day)."""
    n_days = path.grid.n_steps // steps_per_day
    dates = [d.date() for d in pd.bdate_range(first_date, periods=n_days)]
    step = pd.Timedelta(seconds=mesh_seconds)
    stamps = pd.DatetimeIndex([pd.Timestamp(first_date) + j * step for j in range(len(path.values))])
    return IngestedSeries(stamps, np.exp(path.values), path, dates, steps_per_day, mesh_seconds, 0, len(path.values))


def emit_csv(series: IngestedSeries, path: str | Path) -> Path:
    """Write the resampled series as ``timestamp,price``; ``ingest_csv`` reads it back unchanged."""
    p = Path(path)
    ensure_directory(p.parent)
    frame = pd.DataFrame({"timestamp": [t.isoformat() for t in series.timestamps], "price": series.prices})
    frame.to_csv(p, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return p


# ---------------------------------------------------------------------------
# Jump calendars
# ---------------------------------------------------------------------------


def _flag(value: str, row: int) -> bool:
    text = str(value).strip().lower()
    if text in TRUE_FLAGS:
        return True
    if text in FALSE_FLAGS:
        return False
    raise IngestError(f"has_jump must be a boolean, got {value!r}", row=row)


def load_jump_calendar(path: str | Path, dates: list[dt.date]) -> JumpCalendar:
    """Read ``date,has_jump`` rows and key them by the model day of each date."""
    p = Path(path)
    if not p.is_file():
        raise IngestError(f"file not found: {p}")
    try:
        df = pd.read_csv(p, dtype=str)
    except pd.errors.EmptyDataError as exc:
        raise IngestError(f"{p} is empty") from exc
    for col in ("date", "has_jump"):
        if col not in df.columns:
            raise IngestError(f"{p} lacks column {col}")
    if df.empty:
        return JumpCalendar()
    parsed = pd.to_datetime(df["date"].str.strip(), errors="coerce", format="ISO8601")
    row = _first_bad(parsed.isna().to_numpy())
    if row is not None:
        raise IngestError(f"unparsable date {df['date'].iloc[row - 1]!r}", row=row)
    by_date = {d.date(): _flag(v, i + 1) for i, (d, v) in enumerate(zip(parsed, df["has_jump"]))}
    day_of = {d: i for i, d in enumerate(dates)}
    flags = {day_of[d]: f for d, f in by_date.items() if d in day_of}
    logger.info("Jump calendar %s: %d days, %d with jumps", p, len(flags), sum(flags.values()))
    return JumpCalendar(flags)


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------


def write_table(frame: pd.DataFrame, path: str | Path, config_hash: str, fmt: str = "csv") -> Path:
    """Write a result table: CSV with a schema/hash comment line, or JSON records."""
    p = Path(path)
    ensure_directory(p.parent)
    if fmt == "json":
        payload = {
            "schema": CSV_SCHEMA_VERSION,
            "config_hash": config_hash,
            "rows": json.loads(frame.to_json(orient="records", double_precision=15)),
        }
        p = p.with_suffix(".json")
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")
    p = p.with_suffix(".csv")
    with open(p, "w", encoding="utf-8", newline="") as f:
        f.write(f"# schema={CSV_SCHEMA_VERSION} config_hash={config_hash}\n")
        frame.to_csv(f, index=False, float_format="%.10g", lineterminator="\n")
    return p


def read_table(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_metadata(path: str | Path, meta: dict[str, Any]) -> Path:
    p = Path(path)
    ensure_directory(p.parent)
    p.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return p
