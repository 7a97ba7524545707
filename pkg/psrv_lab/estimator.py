"""Locally averaged realized variance, PSRV and the fine-grid QV oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, CoverageError, DegenerateHorizonError
from .sde import LogPricePath, VolPath
from .utils import ceil_tol, floor_tol

logger = logging.getLogger(__name__)

MESH_RTOL = 1e-9


@dataclass(frozen=True)
class Tuning:
    """Tuning bundle of the PSRV; every integer quantity is derived on access.

    k_n = ceil(kappa * delta_n**b) and lambda_n = min(n, ceil(lam * delta_n**(c - 1)))
    with n = floor(h / delta_n).
    """

    delta_n: float
    b: float
    c: float
    kappa: float
    lam: float
    h: float
    tau: float = 0.0

    def __post_init__(self) -> None:
        if not self.delta_n > 0:
            raise ConfigError(f"delta_n must be positive, got {self.delta_n!r}")
        if not -1.0 < self.b <= 0.0:
            raise ConfigError(f"b must lie in (-1, 0], got {self.b!r}")
        if not 0.0 < self.c < 1.0:
            raise ConfigError(f"c must lie in (0, 1), got {self.c!r}")
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa!r}")
        if not self.lam > 0:
            raise ConfigError(f"lam must be positive, got {self.lam!r}")
        if not self.h > 0:
            raise ConfigError(f"h must be positive, got {self.h!r}")

    @classmethod
    def from_multiples(
        cls,
        delta_n: float,
        k_n: int,
        lambda_n: int,
        h: float,
        tau: float = 0.0,
        b: float = -0.5,
        c: float = 0.25,
    ) -> Tuning:
        """Tuning whose k_n and lambda_n come out as the given integers."""
        if k_n < 1 or lambda_n < 1:
            raise ConfigError(f"k_n and lambda_n must be >= 1, got {k_n}, {lambda_n}")
        return cls(
            delta_n=delta_n,
            b=b,
            c=c,
            kappa=k_n * delta_n ** (-b),
            lam=lambda_n * delta_n ** (1.0 - c),
            h=h,
            tau=tau,
        )

    def with_kappa(self, kappa: float) -> Tuning:
        return Tuning(self.delta_n, self.b, self.c, kappa, self.lam, self.h, self.tau)

    def with_tau(self, tau: float) -> Tuning:
        return Tuning(self.delta_n, self.b, self.c, self.kappa, self.lam, self.h, tau)

    @property
    def n(self) -> int:
        return floor_tol(self.h / self.delta_n)

    @property
    def k_n(self) -> int:
        return max(1, ceil_tol(self.kappa * self.delta_n**self.b))

    @property
    def lambda_n(self) -> int:
        return min(self.n, ceil_tol(self.lam * self.delta_n ** (self.c - 1.0)))

    @property
    def big_delta_n(self) -> float:
        return self.lambda_n * self.delta_n

    @property
    def w_n(self) -> float:
        return self.k_n * self.delta_n

    @property
    def n_increments(self) -> int:
        if self.lambda_n < 1:
            return 0
        return self.n // self.lambda_n

    @property
    def overlap(self) -> bool:
        return self.k_n > self.lambda_n


@dataclass(frozen=True)
class PsrvResult:
    """PSRV over [tau, tau + h] together with the spot estimates it was built from."""

    value: float
    n_increments: int
    overlap: bool
    spot: np.ndarray
    windows: np.ndarray


def _check_mesh(path: LogPricePath, delta_n: float) -> None:
    if abs(path.grid.dt / delta_n - 1.0) > MESH_RTOL:
        raise ConfigError(f"path mesh {path.grid.dt!r} differs from delta_n {delta_n!r}")


def _window_means(
    values: np.ndarray, ends: np.ndarray, windows: np.ndarray, delta: float
) -> np.ndarray:
    """(k delta)^-1 * sum of the k squared returns ending at each index in ``ends``."""
    lo = int((ends - windows).min())
    hi = int(ends.max())
    sq = np.diff(values[lo : hi + 1]) ** 2
    out = np.empty(len(ends))
    for k in np.unique(windows):
        sel = windows == k
        view = sliding_window_view(sq, int(k))
        out[sel] = view[ends[sel] - k - lo].sum(axis=1)
    return out / (windows * delta)


def local_avg_rv(path: LogPricePath, t: float, k_n: int) -> float:
    """Average of the ``k_n`` squared returns ending at floor(t / delta) * delta, per unit time."""
    if k_n < 1:
        raise ConfigError(f"k_n must be >= 1, got {k_n!r}")
    end = path.grid.index_floor(t)
    if end - k_n < 0 or end > path.grid.n_steps:
        raise CoverageError(
            f"window of {k_n} returns ending at t={t!r} leaves the path "
            f"[{path.grid.t_start!r}, {path.grid.t_end!r}]"
        )
    return float(
        _window_means(path.values, np.array([end]), np.array([k_n]), path.grid.dt)[0]
    )


def psrv(path: LogPricePath, tuning: Tuning, windows: np.ndarray | None = None) -> PsrvResult:
    """Realized variance of the spot estimates at tau + i * Delta_N, i = 0..floor(h / Delta_N).

    ``windows`` optionally gives one window length (in returns) per estimation
    instant; by default every instant uses ``tuning.k_n``.
    """
    _check_mesh(path, tuning.delta_n)
    n_inc = tuning.n_increments
    if n_inc < 1:
        raise DegenerateHorizonError(
            f"horizon h={tuning.h!r} holds no increment of Delta_N={tuning.big_delta_n!r}"
        )
    start = path.grid.index_floor(tuning.tau)
    ends = start + tuning.lambda_n * np.arange(n_inc + 1)
    if windows is None:
        windows = np.full(n_inc + 1, tuning.k_n, dtype=np.int64)
    else:
        windows = np.asarray(windows, dtype=np.int64)
        if windows.shape != ends.shape or windows.min() < 1:
            raise ConfigError(f"windows must hold {n_inc + 1} positive lengths")
    if (ends - windows).min() < 0 or ends[-1] > path.grid.n_steps:
        raise CoverageError(
            f"PSRV windows over [{tuning.tau!r} - W, {tuning.tau + tuning.h!r}] leave the path "
            f"[{path.grid.t_start!r}, {path.grid.t_end!r}]"
        )
    spot = _window_means(path.values, ends, windows, tuning.delta_n)
    value = float(np.sum(np.diff(spot) ** 2))
    return PsrvResult(
        value=value,
        n_increments=n_inc,
        overlap=bool(windows.max() > tuning.lambda_n),
        spot=spot,
        windows=windows,
    )


def true_qv(vol: VolPath, tau: float, h: float) -> float:
    """Sum of squared variance increments over [tau, tau + h] on the simulation mesh."""
    lo = vol.grid.index_floor(tau)
    hi = vol.grid.index_floor(tau + h)
    if lo < 0 or hi > vol.grid.n_steps or hi < lo:
        raise CoverageError(
            f"[{tau!r}, {tau + h!r}] is not inside the path [{vol.grid.t_start!r}, {vol.grid.t_end!r}]"
        )
    return float(np.sum(np.diff(vol.values[lo : hi + 1]) ** 2))
