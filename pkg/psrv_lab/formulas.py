"""Closed-form moment and bias expressions under the CIR model.

Everything in this file is a pure function of floats (or numpy arrays of
floats).  Times are measured from an *anchor* at which the variance equals a
known value ``x``; with ``d = x - alpha`` the two-time moment is

    E[nu(u) nu(v)] = alpha^2 + alpha d e^{-theta min(u,v)} + c1 e^{-theta max(u,v)}
                     + c0 e^{-theta |u - v|} + c2 e^{-theta (u + v)}

    c0 = gamma^2 alpha / (2 theta)
    c1 = d (alpha + gamma^2 / theta)
    c2 = d^2 + (gamma^2 / theta) (alpha / 2 - x)

Integrals of each of the five kernel components over windows and window
pairs are expressed through a handful of one-dimensional primitives.  All
differences of nearly equal exponentials go through ``expm1`` or a short
Taylor series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SERIES_CUTOFF = 0.1

# ---------------------------------------------------------------------------
# Stable primitives
# ---------------------------------------------------------------------------


def em1mx(x):
    """e^x - 1 - x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    # x^2/2! + ... + x^12/12!, Horner form
    series = xs * xs / 2.0
    term = xs * xs / 2.0
    for n in range(3, 13):
        term = term * xs / n
        series = series + term
    out = np.where(small, series, np.expm1(np.where(small, 0.0, x)) - np.where(small, 0.0, x))
    return out if out.ndim else float(out)


def sinh_mx(x):
    """sinh(x) - x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    term = xs**3 / 6.0
    series = term
    for n in range(5, 14, 2):
        term = term * xs * xs / ((n - 1) * n)
        series = series + term
    xl = np.where(small, 0.0, x)
    out = np.where(small, series, np.sinh(xl) - xl)
    return out if out.ndim else float(out)


def one_minus_exp(x):
    """1 - e^{-x}."""
    return -np.expm1(-np.asarray(x, dtype=float)) if np.ndim(x) else -math.expm1(-x)


def g1(theta: float, length):
    """(e^{theta L} - 1) / theta."""
    return np.expm1(theta * np.asarray(length, dtype=float)) / theta


def g_abs(theta: float, length):
    """Integral of e^{-theta |u - v|} over a square of side L."""
    return 2.0 * em1mx(-theta * np.asarray(length, dtype=float)) / theta**2


def g_min(theta: float, length):
    """Integral of e^{-theta min(u, v)} over [t - L, t]^2, times e^{theta t}."""
    x = theta * np.asarray(length, dtype=float)
    return 2.0 * (x * np.expm1(x) - em1mx(x)) / theta**2


def g_max(theta: float, length):
    """Integral of e^{-theta max(u, v)} over [t - L, t]^2, times e^{theta t}."""
    return 2.0 * em1mx(theta * np.asarray(length, dtype=float)) / theta**2


def g_cross(theta: float, length):
    """(e^{theta L} - 1)(1 - e^{-theta L}) / theta^2."""
    x = theta * np.asarray(length, dtype=float)
    return np.expm1(x) * -np.expm1(-x) / theta**2


def geometric_ratio(rate: float, count, step: float):
    """sum_{j=0}^{count-1} e^{rate j step} = expm1(rate count step) / expm1(rate step)."""
    return np.expm1(rate * np.asarray(count, dtype=float) * step) / math.expm1(rate * step)


# ---------------------------------------------------------------------------
# Moment engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CirMoments:
    """Moments of window integrals of a CIR variance path anchored at nu(0) = x."""

    alpha: float
    theta: float
    gamma: float
    x: float

    @property
    def d(self) -> float:
        return self.x - self.alpha

    @property
    def c0(self) -> float:
        return self.gamma**2 * self.alpha / (2.0 * self.theta)

    @property
    def c1(self) -> float:
        return self.d * (self.alpha + self.gamma**2 / self.theta)

    @property
    def c2(self) -> float:
        return self.d**2 + self.gamma**2 / self.theta * (self.alpha / 2.0 - self.x)

    def mean(self, t):
        return self.alpha + self.d * np.exp(-self.theta * np.asarray(t, dtype=float))

    def second_moment(self, u, v):
        """E[nu(u) nu(v)]."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        th = self.theta
        return (
            self.alpha**2
            + self.alpha * self.d * np.exp(-th * np.minimum(u, v))
            + self.c1 * np.exp(-th * np.maximum(u, v))
            + self.c0 * np.exp(-th * np.abs(u - v))
            + self.c2 * np.exp(-th * (u + v))
        )

    def e1(self, start, length):
        """Integral of e^{-theta u} over [start, start + length]."""
        start = np.asarray(start, dtype=float)
        return np.exp(-self.theta * start) * one_minus_exp(self.theta * np.asarray(length)) / self.theta

    def integral_mean(self, start, length):
        """E[integral of nu over [start, start + length]]."""
        return self.alpha * np.asarray(length, dtype=float) + self.d * self.e1(start, length)

    def square(self, start, length):
        """E[(integral of nu over [start, start + length])^2]."""
        th = self.theta
        start = np.asarray(start, dtype=float)
        length = np.asarray(length, dtype=float)
        end = start + length
        return (
            self.alpha**2 * length**2
            + self.c0 * g_abs(th, length)
            + self.alpha * self.d * np.exp(-th * end) * g_min(th, length)
            + self.c1 * np.exp(-th * end) * g_max(th, length)
            + self.c2 * np.exp(-2.0 * th * end) * g1(th, length) ** 2
        )

    def disjoint(self, a, len_a, c, len_c):
        """E[integral over A times integral over C] for A = [a, a + len_a] ending before c."""
        th = self.theta
        a = np.asarray(a, dtype=float)
        c = np.asarray(c, dtype=float)
        len_a = np.asarray(len_a, dtype=float)
        len_c = np.asarray(len_c, dtype=float)
        e_a = self.e1(a, len_a)
        e_c = self.e1(c, len_c)
        gap = c - (a + len_a)
        abs_part = np.exp(-th * gap) * one_minus_exp(th * len_a) * one_minus_exp(th * len_c) / th**2
        return (
            self.alpha**2 * len_a * len_c
            + self.alpha * self.d * e_a * len_c
            + self.c1 * len_a * e_c
            + self.c0 * abs_part
            + self.c2 * e_a * e_c
        )

    def pair(self, a: float, b: float, c: float, e: float) -> float:
        """E[integral over [a, b] times integral over [c, e]] for arbitrary intervals."""
        if c < a:
            a, b, c, e = c, e, a, b
        if b <= c:
            return float(self.disjoint(a, b - a, c, e - c))
        lo, hi = c, min(b, e)
        total = float(self.square(lo, hi - lo))
        # [a, c) times the second interval
        if c > a:
            total += float(self.disjoint(a, c - a, c, e - c))
        # overlap times the tail of the first interval beyond e
        if b > e:
            total += float(self.disjoint(lo, hi - lo, e, b - e))
        # overlap times the tail of the second interval beyond b
        if e > b:
            total += float(self.disjoint(lo, hi - lo, b, e - b))
        return total

    def cell_squares(self, ends, k: int, delta: float):
        """sum over the k cells of width delta ending at each ``end`` of E[(cell integral)^2]."""
        ends = np.atleast_1d(np.asarray(ends, dtype=float))
        if k <= 0:
            return np.zeros(len(ends))
        starts = ends[:, None] - delta * np.arange(1, k + 1)[None, :]
        return self.square(starts, np.full_like(starts, delta)).sum(axis=1)

    def rv_square(self, end, k: int, delta: float):
        """E[RV^2] for the realized variance of k returns ending at ``end``."""
        end = np.atleast_1d(np.asarray(end, dtype=float))
        return self.square(end - k * delta, k * delta) + 2.0 * self.cell_squares(end, k, delta)


# ---------------------------------------------------------------------------
# Closed-form sums over the PSRV grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelTotals:
    """Per-component totals of sum_i E[(RV_i - RV_{i-1})^2], before the 1/W^2 factor."""

    const: float
    abs: float
    min: float
    max: float
    sum: float

    def combine(self, moments: CirMoments) -> float:
        m = moments
        return (
            m.alpha**2 * self.const
            + m.c0 * self.abs
            + m.alpha * m.d * self.min
            + m.c1 * self.max
            + m.c2 * self.sum
        )


@dataclass(frozen=True)
class GridSums:
    """Geometric sums over the estimation instants t_i = s0 + i Delta, i = 1..n."""

    sigma1: float
    sigma1_lag: float
    sigma2: float
    sigma2_lag: float

    @classmethod
    def build(cls, theta: float, s0: float, big_delta: float, n: int) -> GridSums:
        base1 = math.exp(-theta * s0) * math.expm1(-theta * n * big_delta) / math.expm1(-theta * big_delta)
        base2 = (
            math.exp(-2.0 * theta * s0)
            * math.expm1(-2.0 * theta * n * big_delta)
            / math.expm1(-2.0 * theta * big_delta)
        )
        # base = sum_{i=0}^{n-1} e^{-theta t_i}
        return cls(
            sigma1=base1 * math.exp(-theta * big_delta),
            sigma1_lag=base1,
            sigma2=base2 * math.exp(-2.0 * theta * big_delta),
            sigma2_lag=base2,
        )


def formal_totals(
    theta: float, w: float, big_delta: float, delta: float, k: int, n: int, s0: float
) -> KernelTotals:
    """Kernel totals assuming consecutive windows are disjoint.

    Exact when W <= Delta; in the overlap regime ``overlap_totals`` holds the
    correction.
    """
    sums = GridSums.build(theta, s0, big_delta, n)
    s1 = sums.sigma1 + sums.sigma1_lag
    s2 = sums.sigma2 + sums.sigma2_lag
    gk1 = float(geometric_ratio(theta, k, delta))
    gk2 = float(geometric_ratio(2.0 * theta, k, delta))
    y = theta * w
    # g_abs(W) - e^{-theta(Delta - W)} (1 - e^{-theta W})^2 / theta^2
    abs_gap = (
        one_minus_exp(theta * big_delta) * 4.0 * math.sinh(y / 2.0) ** 2 - 2.0 * sinh_mx(y)
    ) / theta**2
    gw1 = float(g1(theta, w))
    return KernelTotals(
        const=4.0 * n * k * delta**2,
        abs=n * (2.0 * abs_gap + 4.0 * k * g_abs(theta, delta)),
        min=s1 * (g_min(theta, w) + 2.0 * gk1 * g_min(theta, delta))
        - 2.0 * sums.sigma1_lag * w * gw1,
        max=s1 * (g_max(theta, w) + 2.0 * gk1 * g_max(theta, delta))
        - 2.0 * sums.sigma1 * w * gw1,
        sum=s2 * (gw1**2 + 2.0 * gk2 * float(g1(theta, delta)) ** 2)
        - 2.0 * sums.sigma2 * math.exp(theta * big_delta) * gw1**2,
    )


def overlap_totals(
    theta: float, big_delta: float, delta: float, k: int, lambda_n: int, n: int, s0: float
) -> KernelTotals:
    """Correction to ``formal_totals`` when consecutive windows share k - lambda_n returns."""
    m = k - lambda_n
    if m <= 0:
        return KernelTotals(0.0, 0.0, 0.0, 0.0, 0.0)
    sums = GridSums.build(theta, s0, big_delta, n)
    length = m * delta
    x = theta * length
    gm1 = float(geometric_ratio(theta, m, delta))
    gm2 = float(geometric_ratio(2.0 * theta, m, delta))
    lg1 = length * float(g1(theta, length))
    # g_abs(L) - g_cross(L) = -2 (sinh(x) - x) / theta^2
    abs_shift = -2.0 * sinh_mx(x) / theta**2
    return KernelTotals(
        const=-4.0 * n * m * delta**2,
        abs=n * (-2.0 * abs_shift - 4.0 * m * g_abs(theta, delta)),
        min=sums.sigma1_lag
        * (-2.0 * (g_min(theta, length) - lg1) - 4.0 * gm1 * g_min(theta, delta)),
        max=sums.sigma1_lag
        * (-2.0 * (g_max(theta, length) - lg1) - 4.0 * gm1 * g_max(theta, delta)),
        sum=sums.sigma2_lag * (-4.0 * gm2 * float(g1(theta, delta)) ** 2),
    )


# ---------------------------------------------------------------------------
# Microstructure noise
# ---------------------------------------------------------------------------


def noise_term_no_overlap(
    alpha: float, theta: float, e_nu: float, v: float, q: float,
    h: float, delta: float, big_delta: float, k: int,
) -> float:
    """Extra expected PSRV from i.i.d. noise, disjoint windows, in its published form."""
    kd = k * delta
    first = (4.0 * (q + v * v) + 16.0 * alpha * v * delta) * h / (k * delta**2 * big_delta)
    second = (
        8.0 / theta * v * (alpha - e_nu) * one_minus_exp(theta * h)
        * (1.0 + math.exp(-theta * big_delta)) * one_minus_exp(theta * kd)
        / (one_minus_exp(theta * big_delta) * k**2 * delta**2)
    )
    return first + second


def noise_term_overlap(
    alpha: float, theta: float, e_nu: float, v: float, q: float,
    h: float, delta: float, big_delta: float, k: int,
) -> float:
    """Extra expected PSRV from i.i.d. noise, overlapping windows, in its published form."""
    kd = k * delta
    first = (4.0 * (q + v * v) + 16.0 * alpha * v * delta) * h / (k**2 * delta**3)
    bracket = (
        math.expm1(theta * (kd - big_delta)) * (kd + big_delta) / (kd - big_delta)
        + (math.exp(-theta * big_delta) - math.exp(theta * kd))
    )
    braces = (2.0 + k) / (2.0 * kd) * bracket + k / (2.0 * big_delta) * (
        1.0 + math.exp(theta * kd)
    ) * one_minus_exp(theta * big_delta)
    second = (
        8.0 / theta * v * (alpha - e_nu) * one_minus_exp(theta * h)
        / (one_minus_exp(theta * big_delta) * k**2 * delta**2)
        * braces
    )
    return first + second


def noise_count_moments(v: float, q: float, k: int, lambda_n: int) -> tuple[float, float]:
    """Variance of a window's summed squared noise increments and its covariance with the lagged window.

    Squared increments of adjacent returns share one noise draw, so they
    covary by Q - V^2; a squared increment has variance 2Q + 2V^2.
    """
    var_sq = 2.0 * q + 2.0 * v * v
    cov_adj = q - v * v
    var_n = k * var_sq + 2.0 * (k - 1) * cov_adj
    shared = max(k - lambda_n, 0)
    adjacent = max(0, k - lambda_n + 1) + max(0, k - lambda_n - 1)
    return var_n, shared * var_sq + adjacent * cov_adj


# ---------------------------------------------------------------------------
# Expansions
# ---------------------------------------------------------------------------


def expansion_terms(
    alpha: float, theta: float, gamma: float, e_nu: float, h: float
) -> tuple[float, float, float]:
    """Coefficients of Delta, 1/(k Delta) and k delta / Delta in the disjoint-window bias."""
    dev = e_nu - alpha
    q1 = one_minus_exp(theta * h)
    q2 = one_minus_exp(2.0 * theta * h)
    bracket = dev**2 + gamma**2 / theta * (alpha / 2.0 - e_nu)
    a1 = (
        -theta / 2.0 * gamma**2 * alpha * h
        + theta / 2.0 * gamma**2 * dev * q1 / theta
        + theta / 2.0 * q2 * bracket
    )
    a2 = (
        2.0 / theta * gamma**2 * alpha * h
        + 4.0 / theta * gamma**2 * dev * q1 / theta
        + 2.0 / theta * q2 * bracket
        + 4.0 * alpha**2 * h
        + 8.0 * alpha * dev * q1 / theta
    )
    a3 = -(gamma**2) * dev * q1 / theta
    return a1, a2, a3


def overlap_leading(m: float, gamma: float, kappa: float, delta: float, b: float, h: float,
                    beta: float = 0.5) -> float:
    """(4 m^2 / (kappa^2 delta^{1+2b}) - gamma^2 m^{2 beta}) h."""
    return (4.0 * m * m / (kappa**2 * delta ** (1.0 + 2.0 * b)) - gamma**2 * m ** (2.0 * beta)) * h
