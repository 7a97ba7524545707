"""Feasible tuning from prices alone.

Spot variance is reconstructed with the Fourier method (coefficients of the
returns, convolution into variance coefficients, Fejer smoothing); the
vol-of-vol coefficient gamma comes from a zero-intercept regression of the
normalized variance increments on powers of the reconstructed variance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .biascalc import kappa_star_general
from .errors import ConfigError, CoverageError, DataError, DegeneracyError
from .sde import LogPricePath, PathGrid, VolPath

logger = logging.getLogger(__name__)

MIN_RETURNS = 16
MIN_GRID_POINTS = 10
VOL_FLOOR = 1e-10
DEFAULT_BETAS = (0.5, 1.0, 1.5)


class DegenerateKappaError(DegeneracyError):
    """gamma_hat = 0, so no window scale can be formed."""


@dataclass(frozen=True)
class FourierConfig:
    """Cutting frequencies; ``None`` picks the defaults for the sample size.

    Defaults: n_cut = n // 2 and m_cut = floor(sqrt(n) log(n) / (2 pi)),
    capped below n_cut / 2.
    """

    n_cut: int | None = None
    m_cut: int | None = None
    kernel: Literal["fejer", "dirichlet"] = "fejer"

    def __post_init__(self) -> None:
        if self.kernel not in ("fejer", "dirichlet"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")

    def resolve(self, n_returns: int) -> tuple[int, int]:
        n_cut = n_returns // 2 if self.n_cut is None else self.n_cut
        if self.m_cut is None:
            m_cut = int(math.sqrt(n_returns) * math.log(n_returns) / (2.0 * math.pi))
            m_cut = max(1, min(m_cut, math.ceil(n_cut / 2) - 1))
        else:
            m_cut = self.m_cut
        if not 1 <= m_cut < n_cut:
            raise ConfigError(f"cutoffs need 1 <= m_cut < n_cut, got m_cut={m_cut}, n_cut={n_cut}")
        if 2 * n_cut > n_returns:
            raise DataError(f"{n_returns} returns cannot support n_cut={n_cut}")
        return n_cut, m_cut


@dataclass(frozen=True)
class IndirectFit:
    """Zero-intercept regression of normalized variance increments."""

    gamma_hat: float
    theta_hat: float
    alpha_theta_hat: float
    r2: float
    omega_hat: float
    beta: float
    n_floored: int = 0
    degenerate: bool = False
    loglik: float = -math.inf


@dataclass(frozen=True)
class Calibration:
    """Reconstructed spot variance over the calibration span plus its gamma fit."""

    vol_hat: VolPath
    fit: IndirectFit
    beta: float
    n_floored: int = field(default=0)

    def nu_at(self, tau: float) -> float:
        grid = self.vol_hat.grid
        # the reconstruction span ends one grid step after the last point
        span_end = grid.t_end + grid.dt
        if tau < grid.t_start - grid.dt / 2 or tau > span_end + grid.dt * 1e-9:
            raise CoverageError(
                f"tau={tau!r} lies outside the reconstruction span [{grid.t_start!r}, {span_end!r}]"
            )
        j = min(max(grid.index_nearest(tau), 0), grid.n_steps)
        return float(self.vol_hat.values[j])

    def kappa_at(self, tau: float) -> float:
        if self.fit.gamma_hat <= 0:
            raise DegenerateKappaError("gamma_hat = 0: window scale undefined")
        return kappa_star_general(max(self.nu_at(tau), VOL_FLOOR), self.fit.gamma_hat, self.beta)


# ---------------------------------------------------------------------------
# Fourier reconstruction
# ---------------------------------------------------------------------------


def _fourier_coefficients(returns: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """c_s(dp) = (1 / 2 pi) sum_j e^{-i s t_j} r_j on the rescaled uniform grid."""
    spectrum = np.fft.fft(returns) / (2.0 * np.pi)
    return spectrum[np.mod(indices, len(returns))]


def fourier_spot_vol(path: LogPricePath, cfg: FourierConfig | None = None) -> VolPath:
    """Fourier reconstruction of spot variance on the grid of mesh T / (2M + 1)."""
    cfg = cfg or FourierConfig()
    returns = path.returns()
    n = len(returns)
    if n < MIN_RETURNS:
        raise DataError(f"Fourier reconstruction needs at least {MIN_RETURNS} returns, got {n}")
    n_cut, m_cut = cfg.resolve(n)

    price_coeffs = _fourier_coefficients(returns, np.arange(-n_cut, n_cut + 1))
    wide_coeffs = _fourier_coefficients(returns, np.arange(-(n_cut + m_cut), n_cut + m_cut + 1))
    # c_k(nu) for k = -M..M
    vol_coeffs = (2.0 * np.pi / (2 * n_cut + 1)) * fftconvolve(price_coeffs, wide_coeffs, mode="valid")

    ks = np.arange(-m_cut, m_cut + 1)
    if cfg.kernel == "fejer":
        weights = 1.0 - np.abs(ks) / (m_cut + 1)
    else:
        weights = np.ones_like(ks, dtype=float)
    size = 2 * m_cut + 1
    packed = np.zeros(size, dtype=complex)
    packed[np.mod(ks, size)] = weights * vol_coeffs
    # sum_k w_k c_k e^{i k t_j} with t_j = 2 pi j / (2M + 1)
    rescaled = np.real(np.fft.ifft(packed)) * size

    span = path.grid.t_end - path.grid.t_start
    grid = PathGrid(path.grid.t_start, span / size, size - 1)
    logger.debug("Fourier reconstruction: n=%d N=%d M=%d kernel=%s", n, n_cut, m_cut, cfg.kernel)
    return VolPath(grid, rescaled * (2.0 * np.pi / span))


# ---------------------------------------------------------------------------
# Indirect inference
# ---------------------------------------------------------------------------


def indirect_inference(vol_hat: VolPath, beta: float = 0.5) -> IndirectFit:
    """Regress (nu_{i+1} - nu_i) / nu_i^beta on (nu_i^-beta, nu_i^{1-beta}) without intercept."""
    values = np.asarray(vol_hat.values, dtype=float)
    if len(values) < MIN_GRID_POINTS:
        raise DataError(f"indirect inference needs at least {MIN_GRID_POINTS} points, got {len(values)}")
    floored = values < VOL_FLOOR
    n_floored = int(floored.sum())
    if n_floored:
        logger.warning("Floored %d of %d reconstructed variance points at %g", n_floored, len(values), VOL_FLOOR)
        values = np.where(floored, VOL_FLOOR, values)

    dt = vol_hat.grid.dt
    level = values[:-1]
    y = np.diff(values) / level**beta
    design = np.column_stack([level ** (-beta), level ** (1.0 - beta)])

    total = float(np.dot(y, y))
    if total == 0.0:
        logger.warning("Reconstructed variance is constant; vol-of-vol fit is degenerate")
        return IndirectFit(0.0, 0.0, 0.0, 0.0, 0.0, beta, n_floored, degenerate=True)

    coef, _, rank, sv = np.linalg.lstsq(design, y, rcond=None)
    if rank < 2:
        raise DegeneracyError(f"singular regression design (rank {rank})")
    logger.debug("indirect inference condition number %.3g", sv[0] / sv[-1])
    resid = y - design @ coef
    rss = float(np.dot(resid, resid))
    n = len(y)
    omega = math.sqrt(rss / (n - 2))
    r2 = min(max(1.0 - rss / total, 0.0), 1.0)
    # Gaussian log-likelihood of the raw increments: Var(dnu_i) = omega^2 nu_i^(2 beta)
    if rss > 0.0:
        loglik = -0.5 * n * (math.log(2.0 * math.pi * rss / n) + 1.0) - beta * float(np.sum(np.log(level)))
    else:
        loglik = math.inf
    return IndirectFit(
        gamma_hat=omega / math.sqrt(dt),
        theta_hat=float(-coef[1] / dt),
        alpha_theta_hat=float(coef[0] / dt),
        r2=r2,
        omega_hat=omega,
        beta=beta,
        n_floored=n_floored,
        loglik=loglik,
    )


def select_beta(
    vol_hat: VolPath,
    betas: Sequence[float] = DEFAULT_BETAS,
    criterion: Literal["loglik", "r2"] = "loglik",
) -> tuple[float, dict[float, IndirectFit]]:
    """Diffusion exponent whose fit scores best.

    ``"loglik"`` compares the Gaussian likelihood of the variance increments,
    which share one scale across exponents.  ``"r2"`` compares the regression
    R^2; its dependent variable is rescaled by nu^beta, so the values of
    different exponents are not on a common footing.
    """
    if criterion not in ("loglik", "r2"):
        raise ConfigError(f"unknown selection criterion {criterion!r}")
    fits = {b: indirect_inference(vol_hat, b) for b in betas}
    best = max(betas, key=lambda b: getattr(fits[b], criterion))
    return best, fits


# ---------------------------------------------------------------------------
# Feasible window scale
# ---------------------------------------------------------------------------


def trailing_span(prices: LogPricePath, span: float) -> LogPricePath:
    """Last ``span`` years of ``prices``, or the whole path when shorter."""
    grid = prices.grid
    steps = int(round(span / grid.dt))
    if steps >= grid.n_steps:
        return prices
    start = grid.n_steps - steps
    return LogPricePath(PathGrid(grid.t_start + start * grid.dt, grid.dt, steps), prices.values[start:])


def calibrate(
    prices: LogPricePath,
    beta: float = 0.5,
    cfg: FourierConfig | None = None,
    span: float = 1.0,
) -> Calibration:
    """Reconstruct spot variance on the trailing span and fit gamma once."""
    window = trailing_span(prices, span)
    vol_hat = fourier_spot_vol(window, cfg)
    fit = indirect_inference(vol_hat, beta)
    logger.info(
        "Calibrated beta=%.2f: gamma_hat=%.4g r2=%.3f floored=%d", beta, fit.gamma_hat, fit.r2, fit.n_floored
    )
    return Calibration(vol_hat, fit, beta, fit.n_floored)


def feasible_kappa(
    prices: LogPricePath,
    tau: float,
    beta: float = 0.5,
    cfg: FourierConfig | None = None,
    span: float = 1.0,
) -> float:
    """kappa_hat = 2 nu_hat(tau)^{1 - beta} / gamma_hat."""
    if tau > prices.grid.t_end + prices.grid.dt / 2:
        raise CoverageError(f"prices end at {prices.grid.t_end!r}, before tau={tau!r}")
    return calibrate(prices, beta, cfg, span).kappa_at(tau)
