"""No-overlap threshold curves delta*(lambda) and the overlap mesh threshold."""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from psrv_lab.biascalc import (
    e_nu_tau,
    expansion_coeffs,
    lambda_star,
    no_overlap_threshold,
    overlap_threshold_delta,
)
from psrv_lab.sde import CirParams

from .config import ParamSetConfig, ThresholdConfig

logger = logging.getLogger(__name__)


def _cir(ps: ParamSetConfig) -> CirParams:
    return ps.to_params().cir()


def threshold_curves(cfg: ThresholdConfig) -> pd.DataFrame:
    """delta*(lambda) on (0, lambda*] for each parameter set, with the root residual of each point."""
    layout = cfg.year_layout.to_layout()
    tau = layout.day(cfg.tau_days)
    h = layout.day(cfg.horizon_days)
    rows: list[dict] = []
    for ps in cfg.param_sets:
        params = _cir(ps)
        lam_star = lambda_star(params, tau, h)
        if lam_star is None:
            logger.warning("%s: no admissible lambda, no threshold curve", ps.name)
            continue
        co = expansion_coeffs(params, tau, h)
        for i, lam in enumerate(lam_star * np.linspace(1.0 / cfg.n_points, 1.0, cfg.n_points)):
            res = no_overlap_threshold(params, tau, h, float(lam))
            if res.delta_star is None:
                continue
            k = res.kappa_tilde
            residual = co.a3 * k * k + co.a1 * lam * lam * k + co.a2
            scale = max(abs(co.a3 * k * k), abs(co.a1 * lam * lam * k), abs(co.a2))
            rows.append(
                {
                    "param_set": ps.name,
                    "lam": float(lam),
                    "kappa_tilde": k,
                    "delta_star_years": res.delta_star,
                    "delta_star_seconds": layout.to_seconds(res.delta_star),
                    "lambda_star": lam_star,
                    "at_lambda_star": i == cfg.n_points - 1,
                    "root_residual": abs(residual) / scale,
                    "reach_over_h": float(lam) * res.delta_star**0.25 / h,
                }
            )
        logger.info(
            "%s: lambda*=%.4g, max delta*=%.4g s",
            ps.name, lam_star, max((r["delta_star_seconds"] for r in rows if r["param_set"] == ps.name), default=float("nan")),
        )
    return pd.DataFrame(rows)


def overlap_thresholds(cfg: ThresholdConfig) -> pd.DataFrame:
    """Mesh above which bias-optimal windows overlap, at E[nu(tau)] and ``cfg.overlap_lam``."""
    layout = cfg.year_layout.to_layout()
    tau = layout.day(cfg.tau_days)
    rows = []
    for ps in cfg.param_sets:
        params = _cir(ps)
        nu = e_nu_tau(params, tau)
        delta = overlap_threshold_delta(nu, params.gamma, cfg.overlap_lam, cfg.c)
        rows.append(
            {
                "param_set": ps.name,
                "lam": cfg.overlap_lam,
                "c": cfg.c,
                "nu": nu,
                "delta_years": delta,
                "delta_seconds": layout.to_seconds(delta),
            }
        )
    return pd.DataFrame(rows)
