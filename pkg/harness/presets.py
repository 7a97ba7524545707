"""Built-in parameter sets and experiment presets.

``--config`` accepts any key of ``PRESETS`` in place of a file path.
"""

from __future__ import annotations

from pydantic import BaseModel

from .config import (
    EmpiricalConfig,
    NoiseConfig,
    ParamSetConfig,
    ScenarioConfig,
    ThresholdConfig,
)

# ---------------------------------------------------------------------------
# Parameter sets
# ---------------------------------------------------------------------------

SET1 = ParamSetConfig(name="set1", alpha=0.2, theta=5.0, gamma=0.5, rho=-0.2, nu0=0.2)
SET2 = ParamSetConfig(name="set2", alpha=0.03, theta=10.0, gamma=0.25, rho=-0.8, nu0=0.03)
SET3 = ParamSetConfig(name="set3", alpha=0.2, theta=5.0, gamma=0.5, rho=-0.2, nu0=0.4)

PARAMETER_SETS: dict[str, ParamSetConfig] = {"set1": SET1, "set2": SET2, "set3": SET3}

SWEEP_MULTIPLES = [1, 2, 3, 5, 10, 15, 30]
SWEEP_KAPPAS = [1.5, 2.0, 2.5, 3.0]
SMALL_KAPPAS = [0.017, 0.033, 0.05, 0.1, 0.2, 0.4, 0.5, 1.0]


def ckls_set(base: ParamSetConfig, beta: float, mu: float = 0.05) -> ParamSetConfig:
    """``base`` with diffusion exponent ``beta`` and price drift ``mu``."""
    return base.model_copy(update={"name": f"{base.name}_beta{beta:g}", "beta": beta, "mu": mu})


def _scenarios() -> dict[str, ScenarioConfig]:
    out: dict[str, ScenarioConfig] = {}
    for key, ps in PARAMETER_SETS.items():
        # noise-free, oracle kappa
        out[f"{key}_scenario1"] = ScenarioConfig(
            name=f"{key}_scenario1",
            param_set=ps,
            price_mesh_seconds=[60.0],
            grid_multiples=[1, 2, 3],
        )
        out[f"{key}_scenario1_5min"] = ScenarioConfig(
            name=f"{key}_scenario1_5min",
            param_set=ps,
            price_mesh_seconds=[300.0],
            grid_multiples=[1, 2, 3, 6],
        )
        # noisy prices, oracle kappa
        for zeta in (0.5, 1.5, 2.5, 3.5):
            name = f"{key}_scenario2_zeta{zeta:g}"
            out[name] = ScenarioConfig(
                name=name,
                param_set=ps,
                noise=NoiseConfig(zeta=zeta),
                price_mesh_seconds=[300.0],
                grid_multiples=[1, 2, 3, 6],
            )
        # noisy prices, kappa from the prices alone
        for zeta in (0.5, 1.5, 2.5, 3.5):
            name = f"{key}_scenario3_zeta{zeta:g}"
            out[name] = ScenarioConfig(
                name=name,
                param_set=ps,
                noise=NoiseConfig(zeta=zeta),
                n_paths=100,
                price_mesh_seconds=[300.0],
                grid_multiples=[1, 2, 3, 6],
                tuning_mode="feasible",
            )
        for beta in (0.5, 1.0, 1.5):
            name = f"{key}_ckls_beta{beta:g}"
            out[name] = ScenarioConfig(
                name=name,
                param_set=ckls_set(ps, beta),
                price_mesh_seconds=[60.0],
                grid_multiples=[1, 2, 3],
            )
        out[f"{key}_sweep"] = ScenarioConfig(
            name=f"{key}_sweep",
            param_set=ps,
            n_paths=50,
            price_mesh_seconds=[60.0],
            grid_multiples=SWEEP_MULTIPLES,
            tuning_mode="fixed",
            kappas=SWEEP_KAPPAS,
        )
        out[f"{key}_sweep_small_kappa"] = ScenarioConfig(
            name=f"{key}_sweep_small_kappa",
            param_set=ps,
            n_paths=50,
            price_mesh_seconds=[60.0],
            grid_multiples=SWEEP_MULTIPLES,
            tuning_mode="fixed",
            kappas=SMALL_KAPPAS,
        )
    return out


PRESETS: dict[str, BaseModel] = {
    **_scenarios(),
    "thresholds": ThresholdConfig(param_sets=[SET1, SET2, SET3], tau_days=5.0),
    "empirical_1min": EmpiricalConfig(),
}


def get_preset(name: str) -> BaseModel | None:
    return PRESETS.get(name)
