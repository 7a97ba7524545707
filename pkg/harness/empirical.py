"""Daily PSRV series from ingested prices.

Per calendar year the vol-of-vol is fitted once from the Fourier spot-variance
reconstruction; per day the window scale comes from the reconstructed variance
at the start of the day, the jump rule shortens or cancels the windows, and
the PSRV is computed at every configured Delta_N.
"""

from __future__ import annotations

import logging
import math
from itertools import groupby

import numpy as np
import pandas as pd

from psrv_lab.errors import DataError
from psrv_lab.estimator import Tuning, psrv
from psrv_lab.sde import LogPricePath, PathGrid
from psrv_lab.spotvol import Calibration, fourier_spot_vol, indirect_inference, select_beta

from .config import EmpiricalConfig
from .io import IngestedSeries
from .jumps import JumpCalendar, adjust_window_for_jumps

logger = logging.getLogger(__name__)

COLUMNS = [
    "date",
    "day_index",
    "big_delta_minutes",
    "beta",
    "kappa_hat",
    "w_minutes",
    "psrv",
    "skipped",
    "skip_reason",
]


def year_blocks(series: IngestedSeries) -> list[tuple[int, int]]:
    """(first_day, last_day) of each calendar year in the series, inclusive."""
    blocks = []
    start = 0
    for _, days in groupby(series.dates, key=lambda d: d.year):
        n = len(list(days))
        blocks.append((start, start + n - 1))
        start += n
    return blocks


def _slice_days(path: LogPricePath, first: int, last: int, steps_per_day: int) -> LogPricePath:
    lo, hi = first * steps_per_day, (last + 1) * steps_per_day
    grid = PathGrid(path.grid.t_start + lo * path.grid.dt, path.grid.dt, hi - lo)
    return LogPricePath(grid, path.values[lo : hi + 1])


def calibrate_year(prices: LogPricePath, cfg: EmpiricalConfig) -> Calibration:
    """Spot-variance reconstruction and gamma fit over one year of prices."""
    vol_hat = fourier_spot_vol(prices, cfg.fourier.to_config())
    if cfg.beta == "auto":
        beta, fits = select_beta(vol_hat, criterion=cfg.beta_criterion)
        fit = fits[beta]
        logger.info(
            "Selected beta=%.2f by %s (%s)",
            beta,
            cfg.beta_criterion,
            ", ".join(f"{b}: loglik={f.loglik:.1f} r2={f.r2:.3f}" for b, f in fits.items()),
        )
    else:
        beta = float(cfg.beta)
        fit = indirect_inference(vol_hat, beta)
    logger.info("Year fit: beta=%.2f gamma_hat=%.4g r2=%.3f", beta, fit.gamma_hat, fit.r2)
    return Calibration(vol_hat, fit, beta, fit.n_floored)


def run_empirical(
    series: IngestedSeries,
    calendar: JumpCalendar | None,
    cfg: EmpiricalConfig,
) -> pd.DataFrame:
    """Long-format daily PSRV table: one row per (day, Delta_N), skipped days included with a reason."""
    calendar = calendar or JumpCalendar()
    path = series.path
    spd = series.steps_per_day
    delta = path.grid.dt
    h = spd * delta
    rows: list[dict] = []

    logger.info("=== Empirical PSRV: %d days, Delta_N multiples %s ===", series.n_days, cfg.grid_multiples)
    for first, last in year_blocks(series):
        if last + 1 > path.grid.n_steps // spd:
            last = path.grid.n_steps // spd - 1
        if last < first:
            continue
        cal = None
        beta = float("nan") if cfg.beta == "auto" else float(cfg.beta)
        if cfg.kappa_mode == "feasible":
            try:
                cal = calibrate_year(_slice_days(path, first, last, spd), cfg)
                beta = cal.beta
            except DataError as exc:
                logger.warning("Calibration of days %d-%d failed (%s); days skipped", first, last, exc)

        for day in range(first, last + 1):
            tau = path.grid.t_start + day * h
            base = {"date": series.dates[day].isoformat(), "day_index": day, "beta": beta}
            kappa = cfg.kappa
            reason = ""
            if cfg.kappa_mode == "feasible":
                if cal is None:
                    reason = "calibration"
                else:
                    try:
                        kappa = cal.kappa_at(tau)
                    except DataError:
                        reason = "calibration"
            for mult in cfg.grid_multiples:
                row = dict(base, big_delta_minutes=mult * series.mesh_seconds / 60.0, kappa_hat=kappa)
                rows.append(row)
                row.update(w_minutes=np.nan, psrv=np.nan, skipped=True, skip_reason=reason)
                if reason:
                    continue
                tuning = Tuning(delta, cfg.b, cfg.c, kappa, mult * delta ** (1.0 - cfg.c), h, tau)
                lookback = 0 if calendar.is_empty else (math.ceil(tuning.k_n / spd) + 1) * spd
                if day * spd - max(tuning.k_n, lookback) < 0:
                    row["skip_reason"] = "warmup"
                    continue
                plan = adjust_window_for_jumps(
                    day, tuning.k_n / spd, calendar, tuning.lambda_n / spd, tuning.n_increments + 1
                )
                if plan.skip:
                    row["skip_reason"] = plan.reason
                    continue
                windows = np.maximum(np.rint(plan.windows * spd).astype(np.int64), 1)
                try:
                    result = psrv(path, tuning, windows)
                except DataError as exc:
                    logger.debug("Day %d skipped: %s", day, exc)
                    row["skip_reason"] = "coverage"
                    continue
                row.update(
                    w_minutes=float(windows.mean()) * series.mesh_seconds / 60.0,
                    psrv=result.value,
                    skipped=False,
                )

    frame = pd.DataFrame(rows, columns=COLUMNS)
    if len(frame):
        pct = 100.0 * frame["skipped"].mean()
        logger.info("Skipped %.2f%% of day/grid cells (%s)", pct, frame.loc[frame["skipped"], "skip_reason"].value_counts().to_dict())
    return frame
