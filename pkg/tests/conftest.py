"""Shared test fixtures for the PSRV laboratory test suite.

Provides:
- The three published CIR parameter sets
- Small deterministic log-price paths on a 1-minute grid
- Tuning and scenario config factories
- A brute-force PSRV written as an explicit double loop, used as reference
- The published A/B/C/O bias factors written out with plain exponentials
- CSV writers for ingestion tests
"""

import math
from pathlib import Path

import numpy as np
import pytest

# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------


@pytest.fixture
def set1():
    from psrv_lab.sde import CirParams

    return CirParams(alpha=0.2, theta=5.0, gamma=0.5, nu0=0.2)


@pytest.fixture
def set2():
    from psrv_lab.sde import CirParams

    return CirParams(alpha=0.03, theta=10.0, gamma=0.25, nu0=0.03)


@pytest.fixture
def set3():
    from psrv_lab.sde import CirParams

    return CirParams(alpha=0.2, theta=5.0, gamma=0.5, nu0=0.4)


@pytest.fixture
def all_sets(set1, set2, set3):
    return {"set1": set1, "set2": set2, "set3": set3}


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

MINUTE_STEPS = 2000


@pytest.fixture
def minute_path():
    """Random-walk log prices, 2000 one-minute steps starting at t = 0."""
    from psrv_lab.sde import LogPricePath, PathGrid

    rng = np.random.default_rng(12345)
    grid = PathGrid.seconds(60.0, MINUTE_STEPS)
    returns = rng.normal(0.0, 1e-3, MINUTE_STEPS) * (1.0 + 0.5 * np.sin(np.arange(MINUTE_STEPS) / 150.0))
    values = np.concatenate([[0.0], np.cumsum(returns)])
    return LogPricePath(grid, values)


def brute_force_psrv(values, start: int, k: int, lam: int, n_inc: int, delta: float, windows=None) -> float:
    """PSRV by two nested loops over instants and window returns."""
    spots = []
    for i in range(n_inc + 1):
        end = start + i * lam
        width = k if windows is None else int(windows[i])
        total = 0.0
        for j in range(width):
            r = values[end - j] - values[end - j - 1]
            total += r * r
        spots.append(total / (width * delta))
    return sum((spots[i] - spots[i - 1]) ** 2 for i in range(1, len(spots)))


# ---------------------------------------------------------------------------
# Published bias factors, term for term with plain exponentials
# ---------------------------------------------------------------------------
#
# Arguments: alpha, theta, gamma^2, m = E[nu(tau)], k_N, delta_N, Delta_N, h.
# Each function returns the factor including its 1/W_N^2.


def published_a_factor(al, th, g2, m, k, delta, big, h) -> float:
    exp = math.exp
    w = k * delta
    e1 = exp(-th * delta)
    bracket = (
        3.0 / (2.0 * th**2) * (1.0 - e1) ** 2
        + 3.0 / th * (1.0 / th - 2.0 * e1 * delta - e1**2 / th)
        + 3.0 / th * delta * (1.0 + 2.0 * e1)
        + 3.0 / (2.0 * th**2) * (e1**2 + 4.0 * e1 - 5.0)
    )
    inner = (
        2.0 / th * k * bracket
        + 2.0 / th**3 * (exp(-th * w) - 1.0 + k - k * e1)
        + 1.0 / th**3 * exp(-th * big) * (2.0 - exp(th * w) - exp(-th * w))
    )
    return inner / (w**2 * big)


def published_b_factor(al, th, g2, m, k, delta, big, h) -> float:
    exp = math.exp
    w = k * delta
    e1 = exp(-th * delta)
    bracket = (
        3.0 / th**2 * (exp(th * w) - 1.0) * (1.0 - e1)
        + 3.0 / th * (exp(th * w) - 1.0) / (1.0 - e1) * (1.0 / th - 2.0 * e1 * delta - e1**2 / th)
        + 2.0 / th * delta / (exp(th * delta) - 1.0) * (k - 1.0 + exp(th * w) - k * exp(th * delta))
    )
    inner = (1.0 + exp(th * big)) * bracket + 2.0 / th * w * (1.0 - exp(th * w))
    return exp(-th * big) / (1.0 - exp(-th * big)) * inner / w**2


def published_c_factor(al, th, g2, m, k, delta, big, h) -> float:
    exp = math.exp
    w = k * delta
    e1 = exp(-th * delta)
    d = m - al
    c2 = d**2 + g2 / th * (al / 2.0 - m)
    square = (
        3.0 * (exp(2.0 * th * w) - 1.0) * (1.0 - e1) ** 2
        + 2.0 * (1.0 - e1)
        + 2.0 * exp(th * w) * (exp(-2.0 * th * delta) - 1.0)
        + 2.0 * exp(2.0 * th * w - th * delta) * (1.0 - e1)
    )
    quadratic = (
        exp(-2.0 * th * big) * (1.0 - exp(-2.0 * th * h)) / (1.0 - exp(-2.0 * th * big)) / th**2 * c2
        * (
            (1.0 + exp(2.0 * th * big)) / (1.0 - exp(-2.0 * th * delta)) * square
            - 2.0 * exp(th * big) * (1.0 - exp(th * w)) ** 2
        )
    )
    constant = (6.0 * al**2 * delta**2 * k - 2.0 * al**2 * k * delta**2) * h / big
    window = (
        (exp(th * w) - 1.0 + k - k * exp(th * delta))
        + k * exp(th * w) * (exp(th * delta) - 1.0)
        + exp(th * delta) * (1.0 - exp(th * w))
    )
    linear = (
        exp(-th * big) * (1.0 - exp(-th * h)) / (1.0 - exp(-th * big))
        * (
            (
                6.0 * al / th * delta * d * (exp(th * w) - 1.0)
                + 2.0 * al / th * delta * d / (exp(th * delta) - 1.0) * window
            )
            * (1.0 + exp(th * big))
            + 2.0 * al / th * w * d * (1.0 + exp(th * big)) * (1.0 - exp(th * w))
        )
    )
    return (quadratic + constant + linear) / w**2


def published_o_parts(al, th, g2, m, k, delta, big, h) -> dict[str, float]:
    """The overlap factor split by coefficient: alpha^2, c0-type, c2-type and drift terms."""
    exp = math.exp
    w = k * delta
    u = exp(th * delta)
    big_g = exp(th * w)
    q = exp(th * big)
    c2 = g2 * (al - 2.0 * m) / (2.0 * th) + (al - m) ** 2
    two_theta_c2 = 2.0 * al**2 * th + al * (g2 - 4.0 * th * m) + 2.0 * m * (th * m - g2)

    constant = 4.0 * al**2 * h * delta

    c0_type = g2 * al * h / th**3 * (
        exp(-th * (delta + w + big)) / big
        * (
            u
            - 2.0 * exp(th * delta * (1 + k))
            + exp(th * delta * (1 + 2 * k))
            - 2.0 * exp(th * (delta + big))
            - 4.0 * exp(th * (delta * k + big)) * k
            + exp(th * (delta + delta * k + big)) * (2.0 + k * (4.0 - 6.0 * th * delta))
        )
        + 2.0 * exp(-th * delta * (1 + k)) / big
        * (u + 2.0 * exp(th * delta * k) * k - exp(th * delta * (1 + k)) * (1.0 - k * (3.0 * th * delta - 2.0)))
        - exp(-th * (1 + 2 * k) * delta) / (delta * big)
        * (
            -4.0 * exp(2.0 * th * delta * k) * (1.0 - u) * big
            + 6.0 * th * exp(th * delta * (1 + 2 * k)) * k * delta**2
            + delta
            * (
                exp(th * (delta + delta * k - big))
                - 2.0 * exp(th * (delta + 2.0 * delta * k - big))
                + exp(th * (delta + delta * k + big))
                + 4.0 * exp(2.0 * th * delta * k) * k
                - 2.0 * exp(th * delta * (1 + 2 * k)) * (2.0 * k + 3.0 * th * big)
            )
        )
    )

    c2_type = (
        -1.0 / (th**2 * (1.0 - exp(-2.0 * th * big)))
        * exp(-2.0 * th * big) * (1.0 - exp(-2.0 * th * h)) * (big_g - 1.0)
        * (-2.0 * q * (big_g - 1.0) + (-3.0 + u - big_g + 3.0 * u * big_g) * (1.0 + q**2) / (1.0 + u))
        * c2
        - two_theta_c2 / (2.0 * th**3 * (1.0 + u) * (q**2 - 1.0))
        * (1.0 - exp(-2.0 * th * h)) * (big_g - 1.0) * (3.0 - u + big_g - 3.0 * u * big_g) * (1.0 + q**2)
        - two_theta_c2 / th**3 * (1.0 - exp(-2.0 * h * th)) / ((1.0 + u) * (q**2 - 1.0))
        * (
            -2.0 * big_g**2 + 2.0 * u * big_g**2 + q + 2.0 * q**2 + u * q
            - 2.0 * big_g * q - 2.0 * u * big_g * q + big_g**2 * q + u * big_g**2 * q - 2.0 * u * q**2
        )
    )

    fourth = al * th**2 * (4 + k) * delta
    drift = (
        -2.0 / th**2 * (al - m) * (1.0 - exp(-th * h)) * (big_g - 1.0)
        * (g2 + al * th * (1.0 + q * k)) * delta / (q - 1.0)
        + 2.0 / th**3 * (al - m) * exp(-th * (delta + w - big)) * (1.0 - exp(-th * h)) / ((u - 1.0) * (q - 1.0))
        * (
            al * th**2 * exp(2.0 * th * delta * (1 + k)) * k * delta
            - al * th**2 * exp(th * delta * (1 + 2 * k)) * k * delta
            + th * (g2 + al * th) * exp(th * (delta + w - big)) * k * delta
            - th * (g2 + al * th) * exp(th * (delta * (2 + k) - big)) * k * delta
            - exp(th * delta * (2 + k)) * (fourth + g2 * (6.0 + th * w - th * big))
            + exp(th * delta * (1 + k)) * (fourth + g2 * (6.0 + th * delta * (4 + k) - th * big))
            + exp(th * (2.0 * delta * (1 + k) - big)) * (fourth + g2 * (6.0 + big * th))
            - exp(th * (delta + 2.0 * w - big)) * (fourth + g2 * (6.0 + 4.0 * th * delta + th * big))
        )
    )
    scale = 1.0 / w**2
    return {
        "constant": constant * scale,
        "c0": c0_type * scale,
        "c2": c2_type * scale,
        "drift": drift * scale,
    }


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------


def make_tuning(**overrides):
    """Tuning on a 1-minute mesh with k_N = 30, lambda_N = 5 over one 6-hour day."""
    from psrv_lab.estimator import Tuning
    from psrv_lab.utils import DEFAULT_LAYOUT

    defaults = {
        "delta_n": DEFAULT_LAYOUT.minutes(1.0),
        "k_n": 30,
        "lambda_n": 5,
        "h": DEFAULT_LAYOUT.day(),
        "tau": 0.0,
    }
    defaults.update(overrides)
    return Tuning.from_multiples(**defaults)


def make_param_set(**overrides) -> dict:
    defaults = {"name": "set1", "alpha": 0.2, "theta": 5.0, "gamma": 0.5, "nu0": 0.2, "rho": -0.2}
    defaults.update(overrides)
    return defaults


def make_scenario_config(**overrides) -> dict:
    """A scenario small enough for unit tests: 4 paths, 2 estimation days, 1-minute simulation mesh."""
    defaults = {
        "name": "unit",
        "param_set": make_param_set(),
        "n_paths": 4,
        "master_seed": 7,
        "days": 2,
        "sim_mesh_seconds": 60.0,
        "price_mesh_seconds": [60.0],
        "grid_multiples": [1, 2],
        "tuning_mode": "oracle",
    }
    defaults.update(overrides)
    return defaults


def make_empirical_config(**overrides) -> dict:
    defaults = {
        "name": "unit_empirical",
        "grid_multiples": [5, 10],
        "kappa_mode": "fixed",
        "kappa": 0.5,
    }
    defaults.update(overrides)
    return defaults


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def write_lines(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def price_csv(tmp_path):
    """Three one-minute ticks: 100, 101, 100.5."""
    return write_lines(
        tmp_path / "prices.csv",
        [
            "timestamp,price",
            "2024-01-02T09:30:00,100",
            "2024-01-02T09:31:00,101",
            "2024-01-02T09:32:00,100.5",
        ],
    )
