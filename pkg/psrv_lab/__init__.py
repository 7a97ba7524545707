"""PSRV laboratory: simulation, estimation and exact bias of the vol-of-vol estimator.

Provides CIR/CKLS path simulation, the locally averaged realized variance and
PSRV estimators, closed-form finite-sample bias with its expansions, and the
Fourier-based feasible tuning procedure.
"""

from .biascalc import BiasBreakdown, bias_closed_form, bias_moment_assembly, expected_qv
from .estimator import PsrvResult, Tuning, local_avg_rv, psrv, true_qv
from .sde import (
    CirParams,
    CklsParams,
    LogPricePath,
    NoiseSpec,
    PathGrid,
    VolPath,
    add_noise,
    simulate_cir,
    simulate_ckls,
    subsample,
)

__version__ = "0.1.0"

__all__ = [
    "BiasBreakdown",
    "CirParams",
    "CklsParams",
    "LogPricePath",
    "NoiseSpec",
    "PathGrid",
    "PsrvResult",
    "Tuning",
    "VolPath",
    "add_noise",
    "bias_closed_form",
    "bias_moment_assembly",
    "expected_qv",
    "local_avg_rv",
    "psrv",
    "simulate_cir",
    "simulate_ckls",
    "subsample",
    "true_qv",
]
