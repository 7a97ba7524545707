"""Monte Carlo runner: simulate paths, estimate daily PSRV, aggregate relative bias.

Paths are the unit of work.  Each path draws from its own random streams, so
paths can be grouped into tasks and spread over a process pool without
changing any value; results are sorted by path index before aggregation.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd
from tqdm import tqdm

from psrv_lab.biascalc import (
    bias_closed_form,
    expected_qv,
    kappa_star_general,
    leading_bias_no_overlap,
    leading_term_overlap,
)
from psrv_lab.errors import ConfigError, DataError, PsrvLabError
from psrv_lab.estimator import Tuning, psrv
from psrv_lab.sde import (
    LogPricePath,
    NoiseSpec,
    PathGrid,
    PathSimulator,
    add_noise,
    noise_variance_for_zeta,
    path_seed,
)
from psrv_lab.spotvol import VOL_FLOOR, calibrate
from psrv_lab.utils import stride_between

from .config import ScenarioConfig

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int], None]

# kappa for warm-up sizing is evaluated at this multiple of max(nu0, alpha)
WARMUP_NU_FACTOR = 4.0


@dataclass(frozen=True)
class Cell:
    """One (delta_N, Delta_N, kappa) combination of a scenario."""

    delta_seconds: float
    multiple: int
    kappa: float | None = None

    @property
    def big_delta_seconds(self) -> float:
        return self.delta_seconds * self.multiple


@dataclass
class PathOutcome:
    """Per-day results of one path, arrays of shape (n_cells, n_days); NaN marks a skipped day."""

    path_index: int
    psrv: np.ndarray
    qv: np.ndarray
    w_minutes: np.ndarray
    kappa: np.ndarray

    @property
    def rel_bias(self) -> np.ndarray:
        return (self.psrv - self.qv) / self.qv


@dataclass
class BiasTable:
    """Aggregated relative bias per cell, one row each."""

    scenario: str
    rows: list[dict] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def scenario_cells(cfg: ScenarioConfig) -> list[Cell]:
    kappas: list[float | None] = list(cfg.kappas) if cfg.tuning_mode == "fixed" else [None]
    return [
        Cell(mesh, mult, kappa)
        for mesh in cfg.price_mesh_seconds
        for mult in cfg.grid_multiples
        for kappa in kappas
    ]


def _lam(delta: float, multiple: int, c: float) -> float:
    return multiple * delta ** (1.0 - c)


def resolved_warmup_days(cfg: ScenarioConfig) -> int:
    """Days simulated before the first estimation day, enough for the widest window."""
    if cfg.warmup_days is not None:
        return cfg.warmup_days
    params = cfg.params()
    layout = cfg.layout()
    if cfg.tuning_mode == "fixed":
        kappa_max = max(cfg.kappas)
    else:
        # kappa** rises with nu for beta < 1 and falls for beta > 1
        nu_lo = min(params.nu0, params.alpha) / WARMUP_NU_FACTOR
        nu_hi = WARMUP_NU_FACTOR * max(params.nu0, params.alpha)
        kappa_max = max(kappa_star_general(nu, params.gamma, params.beta) for nu in (nu_lo, nu_hi))
    delta_max = layout.seconds(max(cfg.price_mesh_seconds))
    w_max = math.ceil(kappa_max * delta_max**cfg.b) * delta_max
    return math.ceil(layout.to_days(w_max)) + 1


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass
class SimulatedBatch:
    """Daily summaries and coarse price samples of a batch of paths."""

    indices: list[int]
    day_qv: np.ndarray  # (n_days_total, P)
    day_nu: np.ndarray  # (n_days_total + 1, P) variance at day starts
    prices: dict[float, np.ndarray]  # mesh seconds -> (n_points, P)
    return_var: np.ndarray | None  # (P,) variance of simulation-mesh returns


def simulate_batch(cfg: ScenarioConfig, indices: list[int]) -> SimulatedBatch:
    """Simulate whole paths day by day, keeping only what estimation needs."""
    layout = cfg.layout()
    params = cfg.params()
    warmup = resolved_warmup_days(cfg)
    n_days = warmup + cfg.days + cfg.horizon_days - 1
    steps_per_day = stride_between(layout.seconds_per_day, cfg.sim_mesh_seconds)
    grid = PathGrid.seconds(cfg.sim_mesh_seconds, n_days * steps_per_day, 0.0, layout)
    sim = PathSimulator(params, grid, [path_seed(cfg.master_seed, i) for i in indices])
    n_paths = len(indices)

    strides = {m: stride_between(m, cfg.sim_mesh_seconds) for m in cfg.price_mesh_seconds}
    prices = {m: np.empty((n_days * steps_per_day // s + 1, n_paths)) for m, s in strides.items()}
    day_qv = np.empty((n_days, n_paths))
    day_nu = np.empty((n_days + 1, n_paths))
    s1 = np.zeros(n_paths)
    s2 = np.zeros(n_paths)

    for day in range(n_days):
        nu, p = sim.advance(steps_per_day)
        if day == 0:
            day_nu[0] = nu[0]
            for m in prices:
                prices[m][0] = p[0]
        day_nu[day + 1] = nu[-1]
        day_qv[day] = np.sum(np.diff(nu, axis=0) ** 2, axis=0)
        for m, s in strides.items():
            per_day = steps_per_day // s
            prices[m][day * per_day + 1 : (day + 1) * per_day + 1] = p[s::s]
        r = np.diff(p, axis=0)
        s1 += r.sum(axis=0)
        s2 += (r * r).sum(axis=0)

    m_total = n_days * steps_per_day
    return_var = (s2 - s1 * s1 / m_total) / (m_total - 1)
    return SimulatedBatch(list(indices), day_qv, day_nu, prices, return_var)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


def _noise_for_path(cfg: ScenarioConfig, return_var: float) -> NoiseSpec | None:
    spec = cfg.noise_spec()
    if spec is None or spec.is_resolved:
        return spec
    return NoiseSpec(v_eta=noise_variance_for_zeta(return_var, spec.zeta))


def estimate_path(cfg: ScenarioConfig, batch: SimulatedBatch, column: int) -> PathOutcome:
    """Daily PSRV and true QV of one simulated path for every cell."""
    layout = cfg.layout()
    params = cfg.params()
    cells = scenario_cells(cfg)
    warmup = resolved_warmup_days(cfg)
    index = batch.indices[column]
    h_days = cfg.horizon_days
    h = layout.day(h_days)

    shape = (len(cells), cfg.days)
    out_psrv = np.full(shape, np.nan)
    out_w = np.full(shape, np.nan)
    out_kappa = np.full(shape, np.nan)
    qv_days = np.array([batch.day_qv[warmup + j : warmup + j + h_days, column].sum() for j in range(cfg.days)])
    out_qv = np.tile(qv_days, (len(cells), 1))

    noise = _noise_for_path(cfg, float(batch.return_var[column]))
    observed: dict[float, LogPricePath] = {}
    calibrations = {}
    for mesh, values in batch.prices.items():
        grid = PathGrid.seconds(mesh, len(values) - 1, 0.0, layout)
        path = LogPricePath(grid, values[:, column].copy())
        if noise is not None:
            path = add_noise(path, noise, path_seed(cfg.master_seed, index), layout)
        observed[mesh] = path
        if cfg.tuning_mode == "feasible":
            try:
                calibrations[mesh] = calibrate(
                    path, params.beta, cfg.fourier.to_config(), cfg.fourier.span_years
                )
            except DataError as exc:
                logger.warning("Path %d, mesh %gs: calibration failed (%s); days skipped", index, mesh, exc)

    for ci, cell in enumerate(cells):
        delta = layout.seconds(cell.delta_seconds)
        path = observed[cell.delta_seconds]
        if cfg.tuning_mode == "feasible" and cell.delta_seconds not in calibrations:
            continue
        for j in range(cfg.days):
            tau = layout.day(warmup + j)
            try:
                if cfg.tuning_mode == "fixed":
                    kappa = cell.kappa
                elif cfg.tuning_mode == "oracle":
                    nu_tau = max(float(batch.day_nu[warmup + j, column]), VOL_FLOOR)
                    kappa = kappa_star_general(nu_tau, params.gamma, params.beta)
                else:
                    kappa = calibrations[cell.delta_seconds].kappa_at(tau)
                tuning = Tuning(delta, cfg.b, cfg.c, kappa, _lam(delta, cell.multiple, cfg.c), h, tau)
                result = psrv(path, tuning)
            except DataError as exc:
                logger.debug("Path %d day %d cell %d skipped: %s", index, j, ci, exc)
                continue
            out_psrv[ci, j] = result.value
            out_w[ci, j] = layout.to_minutes(tuning.w_n)
            out_kappa[ci, j] = kappa
    return PathOutcome(index, out_psrv, out_qv, out_w, out_kappa)


def run_paths(cfg: ScenarioConfig, indices: list[int]) -> list[PathOutcome]:
    """Worker entry point: simulate and estimate a group of paths."""
    batch = simulate_batch(cfg, indices)
    return [estimate_path(cfg, batch, col) for col in range(len(indices))]


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _tasks(n_paths: int, per_task: int) -> list[list[int]]:
    return [list(range(s, min(s + per_task, n_paths))) for s in range(0, n_paths, per_task)]


def _run_sequential(
    cfg: ScenarioConfig, tasks: list[list[int]], progress: bool, callback: ProgressCallback | None
) -> list[PathOutcome]:
    results: list[PathOutcome] = []
    for done, task in enumerate(tqdm(tasks, desc=cfg.name, unit="task", disable=not progress), 1):
        results.extend(run_paths(cfg, task))
        if callback:
            callback(done, len(tasks))
    return results


def execute(
    cfg: ScenarioConfig,
    workers: int = 1,
    paths_per_task: int = 8,
    progress: bool = False,
    callback: ProgressCallback | None = None,
) -> list[PathOutcome]:
    """Run every path of ``cfg``; the result is sorted by path index."""
    tasks = _tasks(cfg.n_paths, paths_per_task)
    logger.info(
        "Running %s: %d paths in %d tasks, %d workers", cfg.name, cfg.n_paths, len(tasks), workers
    )
    if workers <= 1 or len(tasks) == 1:
        results = _run_sequential(cfg, tasks, progress, callback)
    else:
        try:
            results = []
            with ProcessPoolExecutor(max_workers=workers) as pool:
                future_to_task = {pool.submit(run_paths, cfg, task): task for task in tasks}
                bar = tqdm(total=len(tasks), desc=cfg.name, unit="task", disable=not progress)
                for done, future in enumerate(as_completed(future_to_task), 1):
                    results.extend(future.result())
                    bar.update(1)
                    if callback:
                        callback(done, len(tasks))
                bar.close()
        except PsrvLabError:
            raise
        except Exception as exc:
            logger.warning("Parallel run failed (%s), falling back to sequential", exc)
            results = _run_sequential(cfg, tasks, progress, callback)
    results.sort(key=lambda o: o.path_index)
    return results


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def aggregate(cfg: ScenarioConfig, outcomes: list[PathOutcome]) -> BiasTable:
    """Mean of per-path mean relative bias, with its standard error across paths."""
    layout = cfg.layout()
    table = BiasTable(cfg.name)
    total_days = len(outcomes) * cfg.days
    for ci, cell in enumerate(scenario_cells(cfg)):
        rel = np.array([o.rel_bias[ci] for o in outcomes])
        w = np.array([o.w_minutes[ci] for o in outcomes])
        computed = np.isfinite(rel)
        skipped = int(total_days - computed.sum())
        per_path = np.array([row[ok].mean() for row, ok in zip(rel, computed) if ok.any()])
        n_used = len(per_path)
        mean = float(per_path.mean()) if n_used else math.nan
        se = float(per_path.std(ddof=1) / math.sqrt(n_used)) if n_used > 1 else math.nan
        w_path = np.array([row[ok].mean() for row, ok in zip(w, computed) if ok.any()])
        if skipped:
            logger.warning(
                "%s cell %d: %d of %d days skipped (%.2f%%)",
                cfg.name, ci, skipped, total_days, 100.0 * skipped / total_days,
            )
        delta = layout.seconds(cell.delta_seconds)
        table.rows.append(
            {
                "scenario": cfg.name,
                "param_set": cfg.param_set.name,
                "beta": cfg.param_set.beta,
                "tuning_mode": cfg.tuning_mode,
                "kappa": math.nan if cell.kappa is None else cell.kappa,
                "delta_seconds": cell.delta_seconds,
                "big_delta_seconds": cell.big_delta_seconds,
                "lambda_n": cell.multiple,
                "lam": _lam(delta, cell.multiple, cfg.c),
                "n_paths": n_used,
                "n_days": int(computed.sum()),
                "mean_rel_bias": mean,
                "se": se,
                "mean_w_minutes": float(w_path.mean()) if n_used else math.nan,
                "skipped_pct": 100.0 * skipped / total_days if total_days else 0.0,
            }
        )
    return table


def run_scenario(
    cfg: ScenarioConfig,
    workers: int = 1,
    paths_per_task: int = 8,
    progress: bool = False,
) -> BiasTable:
    """Daily PSRV relative bias of every cell of ``cfg`` over ``cfg.n_paths`` paths."""
    logger.info("=== Simulation and estimation: %s ===", cfg.name)
    outcomes = execute(cfg, workers, paths_per_task, progress)
    logger.info("=== Aggregation: %s ===", cfg.name)
    return aggregate(cfg, outcomes)


def closed_form_overlay(cfg: ScenarioConfig, table: BiasTable) -> BiasTable:
    """Add the closed-form bias and its leading term, both relative to E[QV], at the first estimation day."""
    params = cfg.params()
    layout = cfg.layout()
    tau0 = layout.day(resolved_warmup_days(cfg))
    h = layout.day(cfg.horizon_days)
    noise = cfg.noise_spec()
    if noise is not None and not noise.is_resolved:
        noise = None
    for row in table.rows:
        row.update(closed_form_rel_bias=math.nan, leading_rel_bias=math.nan)
        if not params.is_cir or math.isnan(row["kappa"]):
            continue
        cir = params.cir()
        delta = layout.seconds(row["delta_seconds"])
        tuning = Tuning(delta, cfg.b, cfg.c, row["kappa"], row["lam"], h, tau0)
        qv = expected_qv(cir, tau0, h)
        try:
            total = bias_closed_form(cir, tuning, noise).total
            lead = leading_term_overlap(cir, tuning) if tuning.overlap else leading_bias_no_overlap(cir, tuning)
        except ConfigError as exc:
            logger.debug("No closed form for kappa=%g lam=%g: %s", row["kappa"], row["lam"], exc)
            continue
        row["closed_form_rel_bias"] = total / qv
        row["leading_rel_bias"] = lead / qv
    return table


def bias_sweep(
    cfg: ScenarioConfig,
    workers: int = 1,
    paths_per_task: int = 8,
    progress: bool = False,
) -> BiasTable:
    """Monte Carlo bias over the kappa x lambda grid with closed-form overlay columns."""
    if cfg.tuning_mode != "fixed":
        raise ConfigError("bias_sweep needs tuning_mode 'fixed' with a kappa grid")
    table = run_scenario(cfg, workers, paths_per_task, progress)
    return closed_form_overlay(cfg, table)


def leverage_check(
    cfg: ScenarioConfig,
    workers: int = 1,
    paths_per_task: int = 8,
    progress: bool = False,
) -> pd.DataFrame:
    """Rerun ``cfg`` with rho = 0 and compare mean relative bias in units of combined SE."""
    base = run_scenario(cfg, workers, paths_per_task, progress).to_frame()
    flat_cfg = cfg.model_copy(update={"rho_override": 0.0, "name": f"{cfg.name}_rho0"})
    flat = run_scenario(flat_cfg, workers, paths_per_task, progress).to_frame()
    out = base[["delta_seconds", "big_delta_seconds", "kappa"]].copy()
    out["rel_bias"] = base["mean_rel_bias"]
    out["rel_bias_rho0"] = flat["mean_rel_bias"]
    combined = np.sqrt(base["se"] ** 2 + flat["se"] ** 2)
    out["diff_in_se"] = (out["rel_bias"] - out["rel_bias_rho0"]).abs() / combined
    return out
