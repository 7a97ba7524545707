"""Command-line interface: ``python -m harness <command> [options]``.

Commands: simulate, scenario, sweep, leverage, thresholds, empirical, selftest.
Data goes to CSV (or JSON with ``--format json``), run metadata to a JSON
sidecar.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 selftest failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import metadata
from pathlib import Path
from typing import Any

import pandas as pd

import psrv_lab
from psrv_lab.errors import ConfigError, DataError
from psrv_lab.logging_utils import RunTimer, configure_logging, system_snapshot
from psrv_lab.sde import LogPricePath, PathGrid, PathSimulator, path_seed, subsample

from .config import (
    EmpiricalConfig,
    HarnessSettings,
    ScenarioConfig,
    ThresholdConfig,
    get_settings,
    load_config,
    override,
)
from .empirical import run_empirical
from .io import ingest_csv, load_jump_calendar, write_metadata, write_table
from .runner import bias_sweep, leverage_check, resolved_warmup_days, run_scenario
from .selftest import run_selftest
from .thresholds import overlap_thresholds, threshold_curves

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SELFTEST = 4

VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "pydantic-settings", "tqdm", "psutil")


def _versions() -> dict[str, str]:
    out = {"psrv_lab": psrv_lab.__version__}
    for name in VERSIONED_PACKAGES:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


def _metadata(command: str, cfg: Any, config_hash: str, timer: RunTimer, outputs: list[Path], **extra: Any) -> dict:
    return {
        "command": command,
        "config": cfg.model_dump(mode="json") if cfg is not None else None,
        "config_hash": config_hash,
        "versions": _versions(),
        "system": system_snapshot(),
        "elapsed_s": round(timer.elapsed_s, 3),
        "outputs": [str(p) for p in outputs],
        **extra,
    }


def _print_summary(title: str, summary: dict[str, Any]) -> None:
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)
    for key, value in summary.items():
        print(f"  {key}: {value}")
    print("=" * 60)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _scenario_config(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config, ScenarioConfig)
    return override(cfg, n_paths=args.paths, master_seed=args.seed)


def cmd_simulate(args: argparse.Namespace, settings: HarnessSettings) -> int:
    cfg = _scenario_config(args)
    layout = cfg.layout()
    params = cfg.params()
    n_days = resolved_warmup_days(cfg) + cfg.days + cfg.horizon_days - 1
    steps = int(round(layout.seconds_per_day / cfg.sim_mesh_seconds))
    grid = PathGrid.seconds(cfg.sim_mesh_seconds, n_days * steps, 0.0, layout)
    mesh = cfg.price_mesh_seconds[0]
    stride = int(round(mesh / cfg.sim_mesh_seconds))
    frames = []
    with RunTimer("simulate") as timer:
        for i in range(cfg.n_paths):
            nu, p = PathSimulator(params, grid, [path_seed(cfg.master_seed, i)]).run()
            prices = subsample(LogPricePath(grid, p[:, 0]), stride)
            frames.append(
                pd.DataFrame(
                    {
                        "path": i,
                        "t_years": prices.grid.times,
                        "nu": nu[::stride, 0],
                        "log_price": prices.values,
                    }
                )
            )
    frame = pd.concat(frames, ignore_index=True)
    out_dir = Path(args.out_dir or settings.out_dir)
    data = write_table(frame, out_dir / f"{cfg.name}_paths", cfg.config_hash(), args.format)
    meta = write_metadata(
        out_dir / f"{cfg.name}_paths.meta.json",
        _metadata("simulate", cfg, cfg.config_hash(), timer, [data], seed=cfg.master_seed),
    )
    _print_summary("Simulation Summary", {"paths": cfg.n_paths, "points": len(frame), "data": data, "metadata": meta})
    return EXIT_OK


def _run_table(args: argparse.Namespace, settings: HarnessSettings, command: str) -> int:
    cfg = _scenario_config(args)
    workers = args.workers or settings.workers
    runner = bias_sweep if command == "sweep" else run_scenario
    with RunTimer(command) as timer:
        table = runner(cfg, workers, settings.paths_per_task, progress=not args.no_progress)
    frame = table.to_frame()
    out_dir = Path(args.out_dir or settings.out_dir)
    data = write_table(frame, out_dir / cfg.name, cfg.config_hash(), args.format)
    meta = write_metadata(
        out_dir / f"{cfg.name}.meta.json",
        _metadata(command, cfg, cfg.config_hash(), timer, [data], seed=cfg.master_seed, workers=workers),
    )
    summary: dict[str, Any] = {"scenario": cfg.name, "paths": cfg.n_paths, "seed": cfg.master_seed}
    for row in table.rows:
        label = f"delta={row['delta_seconds']:g}s Delta={row['big_delta_seconds']:g}s"
        if row["tuning_mode"] == "fixed":
            label += f" kappa={row['kappa']:g}"
        summary[label] = f"rel. bias {row['mean_rel_bias']:.4f} (se {row['se']:.4f}), W {row['mean_w_minutes']:.0f} min"
    summary.update(data=data, metadata=meta, elapsed_s=f"{timer.elapsed_s:.1f}")
    _print_summary(f"{command.capitalize()} Summary", summary)
    return EXIT_OK


def cmd_leverage(args: argparse.Namespace, settings: HarnessSettings) -> int:
    cfg = _scenario_config(args)
    workers = args.workers or settings.workers
    with RunTimer("leverage") as timer:
        frame = leverage_check(cfg, workers, settings.paths_per_task, progress=not args.no_progress)
    out_dir = Path(args.out_dir or settings.out_dir)
    data = write_table(frame, out_dir / f"{cfg.name}_leverage", cfg.config_hash(), args.format)
    meta = write_metadata(
        out_dir / f"{cfg.name}_leverage.meta.json",
        _metadata("leverage", cfg, cfg.config_hash(), timer, [data], seed=cfg.master_seed, workers=workers),
    )
    worst = float(frame["diff_in_se"].max()) if len(frame) else 0.0
    summary: dict[str, Any] = {"scenario": cfg.name, "paths": cfg.n_paths, "max |diff| / se": f"{worst:.2f}"}
    for row in frame.itertuples():
        label = f"delta={row.delta_seconds:g}s Delta={row.big_delta_seconds:g}s"
        summary[label] = f"rho {row.rel_bias:.4f} vs rho=0 {row.rel_bias_rho0:.4f} ({row.diff_in_se:.2f} se)"
    summary.update(data=data, metadata=meta, elapsed_s=f"{timer.elapsed_s:.1f}")
    _print_summary("Leverage Summary", summary)
    return EXIT_OK


def cmd_thresholds(args: argparse.Namespace, settings: HarnessSettings) -> int:
    cfg = load_config(args.config or "thresholds", ThresholdConfig)
    with RunTimer("thresholds") as timer:
        curves = threshold_curves(cfg)
        overlap = overlap_thresholds(cfg)
    out_dir = Path(args.out_dir or settings.out_dir)
    data = write_table(curves, out_dir / f"{cfg.name}_curves", cfg.config_hash(), args.format)
    data_overlap = write_table(overlap, out_dir / f"{cfg.name}_overlap", cfg.config_hash(), args.format)
    meta = write_metadata(
        out_dir / f"{cfg.name}.meta.json",
        _metadata("thresholds", cfg, cfg.config_hash(), timer, [data, data_overlap]),
    )
    summary: dict[str, Any] = {}
    if len(curves):
        for name, group in curves.groupby("param_set", sort=False):
            summary[f"{name} max delta* (s)"] = f"{group['delta_star_seconds'].max():.4g}"
    for row in overlap.itertuples():
        summary[f"{row.param_set} overlap mesh (s)"] = f"{row.delta_seconds:.4g}"
    summary.update(data=data, metadata=meta)
    _print_summary("Threshold Summary", summary)
    return EXIT_OK


def cmd_empirical(args: argparse.Namespace, settings: HarnessSettings) -> int:
    cfg = load_config(args.config or "empirical_1min", EmpiricalConfig)
    layout = cfg.year_layout.to_layout()
    with RunTimer("empirical") as timer:
        series = ingest_csv(args.prices, cfg.ingest, layout)
        calendar = load_jump_calendar(args.calendar, series.dates) if args.calendar else None
        frame = run_empirical(series, calendar, cfg)
    out_dir = Path(args.out_dir or settings.out_dir)
    data = write_table(frame, out_dir / cfg.name, cfg.config_hash(), args.format)
    meta = write_metadata(
        out_dir / f"{cfg.name}.meta.json",
        _metadata(
            "empirical", cfg, cfg.config_hash(), timer, [data],
            prices=str(args.prices), calendar=str(args.calendar) if args.calendar else None,
            filled_points=series.filled,
        ),
    )
    skipped = float(frame["skipped"].mean() * 100.0) if len(frame) else 0.0
    _print_summary(
        "Empirical Summary",
        {"days": series.n_days, "rows": len(frame), "skipped_pct": f"{skipped:.2f}", "data": data, "metadata": meta},
    )
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace, settings: HarnessSettings) -> int:
    report = run_selftest(n_route=args.cases, seed=args.seed or 0)
    summary: dict[str, Any] = {
        "checks": report.checks,
        "failures": len(report.failures),
        "elapsed_s": f"{report.elapsed_s:.1f}",
        "status": "passed" if report.passed else "FAILED",
    }
    for i, failure in enumerate(report.failures[:10]):
        summary[f"failure {i + 1}"] = failure
    _print_summary("Selftest Summary", summary)
    return EXIT_OK if report.passed else EXIT_SELFTEST


COMMANDS = {
    "simulate": cmd_simulate,
    "scenario": lambda a, s: _run_table(a, s, "scenario"),
    "sweep": lambda a, s: _run_table(a, s, "sweep"),
    "leverage": cmd_leverage,
    "thresholds": cmd_thresholds,
    "empirical": cmd_empirical,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help="Output directory (default: results or PSRV_OUT_DIR env)")
    common.add_argument("--format", choices=["csv", "json"], default=None, help="Data output format (default: csv)")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", required=True, help="Preset name or JSON/TOML config file")
    run.add_argument("--paths", type=int, default=None, help="Override the number of paths")
    run.add_argument("--seed", type=int, default=None, help="Override the master seed")
    run.add_argument("--workers", type=int, default=None, help="Worker processes (default: physical cores or PSRV_WORKERS env)")
    run.add_argument("--no-progress", action="store_true", help="Hide the progress bar")

    parser = argparse.ArgumentParser(
        prog="harness",
        description="PSRV laboratory - Monte Carlo bias tables, threshold curves and empirical PSRV series",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common, run], help="Export simulated variance and price paths")
    sub.add_parser("scenario", parents=[common, run], help="Relative-bias table of a scenario")
    sub.add_parser("sweep", parents=[common, run], help="Relative bias over a kappa x lambda grid with closed-form overlay")
    sub.add_parser("leverage", parents=[common, run], help="Relative bias with and without leverage, in standard errors")

    thr = sub.add_parser("thresholds", parents=[common], help="No-overlap threshold curves")
    thr.add_argument("--config", default=None, help="Preset name or config file (default: thresholds)")

    emp = sub.add_parser("empirical", parents=[common], help="Daily PSRV series from a price file")
    emp.add_argument("--prices", required=True, help="CSV with timestamp,price columns")
    emp.add_argument("--calendar", default=None, help="CSV with date,has_jump columns")
    emp.add_argument("--config", default=None, help="Preset name or config file (default: empirical_1min)")

    st = sub.add_parser("selftest", parents=[common], help="Closed-form property suite")
    st.add_argument("--cases", type=int, default=200, help="Random route-equivalence cases")
    st.add_argument("--seed", type=int, default=0, help="Seed of the random cases")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    configure_logging(logging.DEBUG if args.verbose else settings.log_level)
    if args.format is None:
        args.format = settings.output_format
    try:
        return COMMANDS[args.command](args, settings)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("Data error: %s", exc)
        return EXIT_DATA
    except Exception:
        logger.exception("Unexpected failure in %s", args.command)
        return EXIT_FAILURE


def main() -> None:
    """CLI entry point."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
