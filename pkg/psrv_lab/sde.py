"""Variance and log-price path simulation.

The variance leg follows a CIR process (exact transition sampling) or a CKLS
process with diffusion exponent beta != 1/2 (full-truncation Euler).  The
log-price leg is an Euler scheme driven by increments correlated with the
variance innovations.

Every path owns its random streams: a ``SeedSequence`` keyed by
``(master_seed, path_index)`` from which one Philox generator per leg is
derived.  Paths can therefore be grouped into vectorized batches, advanced in
chunks, or spread over worker processes without changing a single value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .errors import CalibrationError, ConfigError, ParameterError
from .utils import DEFAULT_LAYOUT, YearLayout, floor_tol

logger = logging.getLogger(__name__)

SeedLike = int | np.random.SeedSequence


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CirParams:
    """CIR variance parameters: d nu = theta (alpha - nu) dt + gamma sqrt(nu) dZ."""

    alpha: float
    theta: float
    gamma: float
    nu0: float

    def __post_init__(self) -> None:
        for name in ("alpha", "theta", "gamma", "nu0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")
        if 2.0 * self.alpha * self.theta <= self.gamma**2:
            raise ParameterError(
                f"Feller condition violated: 2*alpha*theta={2 * self.alpha * self.theta:.6g}"
                f" <= gamma^2={self.gamma**2:.6g}"
            )

    @property
    def degrees_of_freedom(self) -> float:
        """Degrees of freedom of the noncentral chi-square transition law."""
        return 4.0 * self.theta * self.alpha / self.gamma**2

    def mean(self, t: float | np.ndarray) -> float | np.ndarray:
        """E[nu(t)] = (nu0 - alpha) e^{-theta t} + alpha."""
        return (self.nu0 - self.alpha) * np.exp(-self.theta * np.asarray(t)) + self.alpha


@dataclass(frozen=True)
class CklsParams:
    """CKLS variance parameters plus the price drift and leverage."""

    alpha: float
    theta: float
    gamma: float
    nu0: float
    beta: float = 0.5
    mu: float = 0.0
    rho: float = 0.0

    def __post_init__(self) -> None:
        for name in ("alpha", "theta", "gamma", "nu0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")
        if not self.beta >= 0.5:
            raise ParameterError(f"beta must be >= 1/2, got {self.beta!r}")
        if not abs(self.rho) <= 1.0:
            raise ParameterError(f"rho must lie in [-1, 1], got {self.rho!r}")
        if not math.isfinite(self.mu):
            raise ParameterError(f"mu must be finite, got {self.mu!r}")
        if self.is_cir:
            # Raises on a Feller violation.
            self.cir()

    @property
    def is_cir(self) -> bool:
        return self.beta == 0.5

    def cir(self) -> CirParams:
        if not self.is_cir:
            raise ParameterError(f"beta={self.beta} is not a CIR specification")
        return CirParams(self.alpha, self.theta, self.gamma, self.nu0)

    @classmethod
    def from_cir(cls, params: CirParams, mu: float = 0.0, rho: float = 0.0) -> CklsParams:
        return cls(params.alpha, params.theta, params.gamma, params.nu0, 0.5, mu, rho)


# ---------------------------------------------------------------------------
# Grids and paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathGrid:
    """Uniform time grid ``t_start + i * dt`` for ``i = 0..n_steps`` (years)."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps!r}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def index_floor(self, t: float) -> int:
        """Index of the last grid point at or before ``t`` (may fall outside the grid)."""
        return floor_tol((t - self.t_start) / self.dt)

    def index_nearest(self, t: float) -> int:
        return int(round((t - self.t_start) / self.dt))

    @classmethod
    def seconds(
        cls, mesh_seconds: float, n_steps: int, t_start: float = 0.0,
        layout: YearLayout = DEFAULT_LAYOUT,
    ) -> PathGrid:
        return cls(t_start, layout.seconds(mesh_seconds), n_steps)


@dataclass(frozen=True)
class VolPath:
    """Spot variance samples on a grid."""

    grid: PathGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != self.grid.n_steps + 1:
            raise ConfigError(
                f"path holds {len(self.values)} values, grid needs {self.grid.n_steps + 1}"
            )


@dataclass(frozen=True)
class LogPricePath:
    """Log prices on a grid."""

    grid: PathGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != self.grid.n_steps + 1:
            raise ConfigError(
                f"path holds {len(self.values)} values, grid needs {self.grid.n_steps + 1}"
            )

    def returns(self) -> np.ndarray:
        return np.diff(self.values)


@dataclass(frozen=True)
class NoiseSpec:
    """I.i.d. microstructure noise, given by its moments or by a noise-to-signal ratio.

    Exactly one of ``v_eta`` and ``zeta`` is set.  Gaussian noise is assumed, so
    ``q_eta`` defaults to ``3 * v_eta**2``.
    """

    v_eta: float | None = None
    q_eta: float | None = None
    zeta: float | None = None

    def __post_init__(self) -> None:
        if (self.v_eta is None) == (self.zeta is None):
            raise ConfigError("NoiseSpec needs exactly one of v_eta and zeta")
        if self.zeta is not None:
            if not self.zeta >= 0:
                raise ConfigError(f"zeta must be >= 0, got {self.zeta!r}")
            if self.q_eta is not None:
                raise ConfigError("q_eta cannot be combined with zeta")
            return
        if not self.v_eta >= 0:
            raise ConfigError(f"v_eta must be >= 0, got {self.v_eta!r}")
        if self.q_eta is None:
            object.__setattr__(self, "q_eta", 3.0 * self.v_eta**2)
        elif self.q_eta < self.v_eta**2 * (1.0 - 1e-12):
            raise ConfigError(f"q_eta={self.q_eta!r} is below v_eta^2={self.v_eta**2!r}")

    @property
    def is_resolved(self) -> bool:
        return self.v_eta is not None

    @property
    def is_zero(self) -> bool:
        return (self.v_eta == 0) if self.is_resolved else (self.zeta == 0)


def noise_variance_for_zeta(return_variance: float, zeta: float) -> float:
    """V_eta giving std(noise increment) = zeta * std(return)."""
    return zeta**2 * return_variance / 2.0


def calibrate_noise(
    path: LogPricePath, zeta: float, layout: YearLayout = DEFAULT_LAYOUT
) -> NoiseSpec:
    """Resolve a noise-to-signal ratio against a 1-second noise-free path."""
    if abs(path.grid.dt / layout.seconds(1.0) - 1.0) > 1e-9:
        raise CalibrationError(
            f"zeta calibration needs a 1-second path, got mesh {layout.to_seconds(path.grid.dt):.6g} s"
        )
    returns = path.returns()
    if returns.size < 2:
        raise CalibrationError("zeta calibration needs at least two returns")
    variance = float(np.var(returns, ddof=1))
    if not variance > 0:
        raise CalibrationError("zeta calibration on a path with constant returns")
    return NoiseSpec(v_eta=noise_variance_for_zeta(variance, zeta))


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


class Leg(IntEnum):
    """Independent random streams owned by one path."""

    VOL = 0
    VOL_CHI = 1
    PRICE = 2
    NOISE = 3


def path_seed(master_seed: int, path_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(path_index,))


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(entropy=seed)


def leg_generator(seed: SeedLike, leg: Leg) -> np.random.Generator:
    ss = as_seed_sequence(seed)
    child = np.random.SeedSequence(entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(leg),))
    return np.random.Generator(np.random.Philox(child))


# ---------------------------------------------------------------------------
# Batch engine
# ---------------------------------------------------------------------------


@dataclass
class PathSimulator:
    """Advance a batch of independent paths, chunk by chunk.

    ``advance(n)`` returns arrays of shape ``(n + 1, n_paths)`` whose first row
    is the state at the end of the previous chunk.  Chunking never changes the
    values: each leg is drawn from its own per-path generator.
    """

    params: CklsParams
    grid: PathGrid
    seeds: Sequence[SeedLike]
    with_price: bool = True
    step: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("PathSimulator needs at least one seed")
        self.seeds = [as_seed_sequence(s) for s in self.seeds]
        n = len(self.seeds)
        self._vol_rng = [leg_generator(s, Leg.VOL) for s in self.seeds]
        self._chi_rng = [leg_generator(s, Leg.VOL_CHI) for s in self.seeds]
        self._price_rng = [leg_generator(s, Leg.PRICE) for s in self.seeds]
        self._nu = np.full(n, self.params.nu0, dtype=float)
        self._x = self._nu.copy()
        self._p = np.zeros(n, dtype=float)

        p, dt = self.params, self.grid.dt
        if p.is_cir:
            phi = math.exp(-p.theta * dt)
            one_minus_phi = -math.expm1(-p.theta * dt)
            self._c = p.gamma**2 * one_minus_phi / (4.0 * p.theta)
            self._lam_per_nu = phi / self._c
            self._chi_df = 4.0 * p.theta * p.alpha / p.gamma**2 - 1.0
            self._phi = phi
            self._var_per_nu = p.gamma**2 / p.theta * (phi - phi * phi)
            self._var_const = p.alpha * p.gamma**2 / (2.0 * p.theta) * one_minus_phi**2

    @property
    def n_paths(self) -> int:
        return len(self.seeds)

    @property
    def remaining(self) -> int:
        return self.grid.n_steps - self.step

    def _draw(self, generators: list[np.random.Generator], draw) -> np.ndarray:
        return np.column_stack([draw(g) for g in generators])

    def advance(self, n_steps: int) -> tuple[np.ndarray, np.ndarray | None]:
        n = min(n_steps, self.remaining)
        if n <= 0:
            raise ConfigError("simulation grid exhausted")
        p, dt = self.params, self.grid.dt
        z = self._draw(self._vol_rng, lambda g: g.standard_normal(n))
        nu = np.empty((n + 1, self.n_paths))
        nu[0] = self._nu

        if p.is_cir:
            df = self._chi_df
            y = self._draw(self._chi_rng, lambda g: g.chisquare(df, n))
            c, lam_per_nu = self._c, self._lam_per_nu
            for i in range(n):
                nu[i + 1] = c * ((z[i] + np.sqrt(lam_per_nu * nu[i])) ** 2 + y[i])
            innovation = None
            if self.with_price:
                mean = p.alpha + (nu[:-1] - p.alpha) * self._phi
                sd = np.sqrt(nu[:-1] * self._var_per_nu + self._var_const)
                innovation = (nu[1:] - mean) / sd
        else:
            x = self._x.copy()
            drift_dt = p.theta * dt
            diff_dt = p.gamma * math.sqrt(dt)
            for i in range(n):
                xp = np.maximum(x, 0.0)
                x = x + drift_dt * (p.alpha - xp) + diff_dt * xp**p.beta * z[i]
                nu[i + 1] = np.maximum(x, 0.0)
            self._x = x
            innovation = z

        self._nu = nu[-1].copy()
        prices = None
        if self.with_price:
            b = self._draw(self._price_rng, lambda g: g.standard_normal(n))
            shock = p.rho * innovation + math.sqrt(1.0 - p.rho**2) * b
            dp = p.mu * dt + np.sqrt(np.maximum(nu[:-1], 0.0) * dt) * shock
            # accumulate from the carried level so chunk boundaries add in the same order
            prices = np.cumsum(np.vstack([self._p[None, :], dp]), axis=0)
            self._p = prices[-1].copy()
        self.step += n
        return nu, prices

    def run(self) -> tuple[np.ndarray, np.ndarray | None]:
        """Simulate the remaining grid in one chunk."""
        return self.advance(self.remaining)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def simulate_cir(params: CirParams, grid: PathGrid, seed: SeedLike) -> VolPath:
    """Exact CIR variance path started at ``params.nu0`` on ``grid.t_start``."""
    sim = PathSimulator(CklsParams.from_cir(params), grid, [seed], with_price=False)
    nu, _ = sim.run()
    return VolPath(grid, nu[:, 0])


def simulate_ckls(
    params: CklsParams, grid: PathGrid, seed: SeedLike
) -> tuple[VolPath, LogPricePath]:
    """Variance and log-price paths; the log price starts at 0."""
    sim = PathSimulator(params, grid, [seed])
    nu, prices = sim.run()
    return VolPath(grid, nu[:, 0]), LogPricePath(grid, prices[:, 0])


def add_noise(
    path: LogPricePath, spec: NoiseSpec, seed: SeedLike, layout: YearLayout = DEFAULT_LAYOUT
) -> LogPricePath:
    """Contaminate observed log prices with i.i.d. Gaussian noise."""
    if spec.is_zero:
        return path
    if not spec.is_resolved:
        spec = calibrate_noise(path, spec.zeta, layout)
    rng = leg_generator(seed, Leg.NOISE)
    eta = rng.normal(0.0, math.sqrt(spec.v_eta), size=len(path.values))
    return LogPricePath(path.grid, path.values + eta)


def subsample(path: LogPricePath, stride: int) -> LogPricePath:
    """Keep every ``stride``-th observation starting at index 0."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride!r}")
    if stride == 1:
        return path
    if stride > path.grid.n_steps:
        raise ConfigError(f"stride {stride} exceeds the path's {path.grid.n_steps} steps")
    values = path.values[::stride]
    grid = PathGrid(path.grid.t_start, path.grid.dt * stride, len(values) - 1)
    return LogPricePath(grid, values)
