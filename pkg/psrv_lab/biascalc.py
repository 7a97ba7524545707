"""Finite-sample bias of the PSRV and the LARV under the CIR model.

Two independent routes evaluate the expected PSRV:

- ``bias_moment_assembly`` adds up window-level second moments instant by
  instant (numeric sums over returns);
- ``bias_closed_form`` collapses the same sums into geometric series and
  reports the bias split into its A/B/C/O/D factors.

The remaining functions are the asymptotic expansions, the bias-optimal
window scales, and the thresholds separating the overlap regimes.

Anchor conventions
------------------
``anchor="tau"``: moments are propagated from nu(tau) = E[nu(tau)] (or a given
``nu_tau``), and the backward-looking windows use the same expressions at
negative relative times.  This is the published convention; with nu0 = alpha
it makes the bias independent of tau.

``anchor="start"``: the process starts at time 0 from nu0, every window must
lie in t >= 0, and the result is the exact expectation of the estimator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from . import formulas as fm
from .errors import ConfigError, DegenerateHorizonError, RateConstraintError
from .estimator import Tuning
from .sde import CirParams, NoiseSpec

logger = logging.getLogger(__name__)

Anchor = Literal["tau", "start"]

BOUNDARY_RTOL = 1e-9


@dataclass(frozen=True)
class BiasBreakdown:
    """Expected PSRV minus expected QV, split into named terms."""

    a_term: float
    b_term: float
    c_term: float
    o_term: float
    d_term: float
    total: float
    a_factor: float
    b_factor: float
    c_factor: float
    o_factor: float
    d_factor: float
    d_exact: float
    e_nu_tau: float
    expected_qv: float
    overlap: bool

    def as_dict(self) -> dict[str, float | bool]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Coefficients of Delta_N, 1/(k_N Delta_N) and k_N delta_N / Delta_N."""

    a1: float
    a2: float
    a3: float

    def leading(self, tuning: Tuning) -> float:
        k, dl, big = tuning.k_n, tuning.delta_n, tuning.big_delta_n
        return self.a1 * big + self.a2 / (k * big) + self.a3 * k * dl / big


@dataclass(frozen=True)
class NoOverlapThreshold:
    kappa_tilde: float | None
    delta_star: float | None


# ---------------------------------------------------------------------------
# Basic expectations
# ---------------------------------------------------------------------------


def e_nu_tau(params: CirParams, tau: float) -> float:
    """E[nu(tau)] = (nu0 - alpha) e^{-theta tau} + alpha."""
    if tau < 0:
        raise ConfigError(f"tau must be >= 0, got {tau!r}")
    return (params.nu0 - params.alpha) * math.exp(-params.theta * tau) + params.alpha


def expected_qv(params: CirParams, tau: float, h: float, nu_tau: float | None = None) -> float:
    """E[<nu, nu>] over [tau, tau + h]; conditional on nu(tau) when ``nu_tau`` is given."""
    m = e_nu_tau(params, tau) if nu_tau is None else nu_tau
    g2 = params.gamma**2
    return g2 * params.alpha * h + g2 * (m - params.alpha) * fm.one_minus_exp(params.theta * h) / params.theta


def _anchor(
    params: CirParams, tuning: Tuning, anchor: Anchor, nu_tau: float | None
) -> tuple[fm.CirMoments, float]:
    """Moment engine and the time of tau relative to the anchor."""
    if anchor == "tau":
        x = e_nu_tau(params, tuning.tau) if nu_tau is None else nu_tau
        if not x > 0:
            raise ConfigError(f"nu_tau must be positive, got {x!r}")
        return fm.CirMoments(params.alpha, params.theta, params.gamma, x), 0.0
    if anchor == "start":
        if nu_tau is not None:
            raise ConfigError("nu_tau conditioning requires anchor='tau'")
        if tuning.tau - tuning.w_n < -BOUNDARY_RTOL * tuning.w_n:
            raise ConfigError(
                f"anchor='start' needs tau >= W_N, got tau={tuning.tau!r}, W_N={tuning.w_n!r}"
            )
        return fm.CirMoments(params.alpha, params.theta, params.gamma, params.nu0), tuning.tau
    raise ConfigError(f"unknown anchor {anchor!r}")


def _require_increments(tuning: Tuning) -> int:
    n = tuning.n_increments
    if n < 1:
        raise DegenerateHorizonError(
            f"horizon h={tuning.h!r} holds no increment of Delta_N={tuning.big_delta_n!r}"
        )
    return n


# ---------------------------------------------------------------------------
# Route 1: moment assembly
# ---------------------------------------------------------------------------


def overlap_components(
    params: CirParams,
    tuning: Tuning,
    anchor: Anchor = "tau",
    nu_tau: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-instant cross-moment pieces O1..O4 of E[RV_i RV_{i-1}] for shared windows.

    RV_i splits into the newest Delta piece and the part shared with RV_{i-1};
    RV_{i-1} splits into that shared part and its oldest Delta piece.
    """
    n = _require_increments(tuning)
    k, lam, delta = tuning.k_n, tuning.lambda_n, tuning.delta_n
    if k < lam:
        raise ConfigError(f"windows do not overlap: k_n={k} < lambda_n={lam}")
    mom, s0 = _anchor(params, tuning, anchor, nu_tau)
    t = s0 + tuning.big_delta_n * np.arange(1, n + 1)
    big, w = tuning.big_delta_n, tuning.w_n
    shared = (k - lam) * delta
    newest = t - big
    oldest = t - big - w
    shared_start = t - w
    o1 = mom.disjoint(oldest, big, newest, big)
    o2 = mom.disjoint(shared_start, shared, newest, big)
    o3 = mom.disjoint(oldest, big, shared_start, shared)
    o4 = mom.square(shared_start, shared) + 2.0 * mom.cell_squares(t - big, k - lam, delta)
    return o1, o2, o3, o4


def bias_moment_assembly(
    params: CirParams,
    tuning: Tuning,
    anchor: Anchor = "tau",
    nu_tau: float | None = None,
    split_cross: bool | None = None,
) -> float:
    """E[PSRV] assembled from E[RV_i^2], E[RV_{i-1}^2] and E[RV_i RV_{i-1}].

    ``split_cross`` forces (True) or forbids (False) the O1..O4 decomposition of
    the cross moment; by default it is used exactly when the windows overlap.
    """
    n = _require_increments(tuning)
    mom, s0 = _anchor(params, tuning, anchor, nu_tau)
    k, delta, w, big = tuning.k_n, tuning.delta_n, tuning.w_n, tuning.big_delta_n
    t = s0 + big * np.arange(0, n + 1)
    rv2 = mom.rv_square(t, k, delta)
    use_split = tuning.overlap if split_cross is None else split_cross
    if use_split:
        o1, o2, o3, o4 = overlap_components(params, tuning, anchor, nu_tau)
        cross = o1 + o2 + o3 + o4
    else:
        if tuning.overlap:
            raise ConfigError("overlapping windows need the split cross moment")
        cross = mom.disjoint(t[:-1] - w, w, t[1:] - w, w)
    per_instant = rv2[1:] + rv2[:-1] - 2.0 * cross
    return float(np.sum(per_instant) / w**2)


# ---------------------------------------------------------------------------
# Route 2: closed form
# ---------------------------------------------------------------------------


def _resolved_noise(noise: NoiseSpec | None) -> tuple[float, float] | None:
    if noise is None or noise.is_zero:
        return None
    if not noise.is_resolved:
        raise ConfigError("closed-form noise terms need v_eta, not an unresolved zeta")
    return noise.v_eta, noise.q_eta


def noise_bias_exact(
    params: CirParams,
    tuning: Tuning,
    noise: NoiseSpec,
    anchor: Anchor = "tau",
    nu_tau: float | None = None,
) -> float:
    """Extra expected PSRV due to i.i.d. noise, including adjacent-return noise covariance."""
    resolved = _resolved_noise(noise)
    if resolved is None:
        return 0.0
    v, q = resolved
    n = _require_increments(tuning)
    mom, s0 = _anchor(params, tuning, anchor, nu_tau)
    k, lam, w, big = tuning.k_n, tuning.lambda_n, tuning.w_n, tuning.big_delta_n
    t = s0 + big * np.arange(1, n + 1)
    if tuning.overlap:
        # symmetric difference: newest and oldest Delta pieces
        mass = mom.integral_mean(t - big, big) + mom.integral_mean(t - big - w, big)
    else:
        mass = mom.integral_mean(t - w, w) + mom.integral_mean(t - big - w, w)
    var_n, cov_n = fm.noise_count_moments(v, q, k, lam)
    per_instant = 8.0 * v * mass + 2.0 * var_n - 2.0 * cov_n
    return float(np.sum(per_instant) / w**2)


def bias_closed_form(
    params: CirParams,
    tuning: Tuning,
    noise: NoiseSpec | None = None,
    anchor: Anchor = "tau",
    nu_tau: float | None = None,
) -> BiasBreakdown:
    """Expected PSRV minus expected QV over [tau, tau + h], term by term."""
    n = _require_increments(tuning)
    mom, s0 = _anchor(params, tuning, anchor, nu_tau)
    th, g2, al = params.theta, params.gamma**2, params.alpha
    k, lam, delta = tuning.k_n, tuning.lambda_n, tuning.delta_n
    w, big, h = tuning.w_n, tuning.big_delta_n, tuning.h
    e_nu = float(mom.mean(s0))
    q_h = fm.one_minus_exp(th * h)

    totals = fm.formal_totals(th, w, big, delta, k, n, s0)
    a_factor = float(totals.abs / (2.0 * th * h * w**2))
    b_factor = float(totals.max / (w**2 * q_h * math.exp(-th * s0)))
    c_factor = float(
        (al**2 * totals.const + al * mom.d * (totals.min + totals.max) + mom.c2 * totals.sum) / w**2
    )
    overlap = tuning.overlap
    o_factor = 0.0
    if overlap:
        o_factor = fm.overlap_totals(th, big, delta, k, lam, n, s0).combine(mom) / w**2

    d_factor = 0.0
    d_exact = 0.0
    resolved = _resolved_noise(noise)
    if resolved is not None:
        v, q = resolved
        if overlap:
            if abs(w / big - 1.0) <= BOUNDARY_RTOL:
                raise ConfigError("overlap noise term is singular at W_N = Delta_N")
            d_factor = fm.noise_term_overlap(al, th, e_nu, v, q, h, delta, big, k)
        else:
            d_factor = fm.noise_term_no_overlap(al, th, e_nu, v, q, h, delta, big, k)
        d_exact = noise_bias_exact(params, tuning, noise, anchor, nu_tau)

    a_term = g2 * al * h * (a_factor - 1.0)
    b_term = g2 * (e_nu - al) * q_h / th * (b_factor - 1.0)
    c_term = c_factor
    o_term = o_factor
    d_term = d_factor
    total = a_term + b_term + c_term + o_term + d_term
    return BiasBreakdown(
        a_term=a_term,
        b_term=b_term,
        c_term=c_term,
        o_term=o_term,
        d_term=d_term,
        total=total,
        a_factor=a_factor,
        b_factor=b_factor,
        c_factor=c_factor,
        o_factor=o_factor,
        d_factor=d_factor,
        d_exact=d_exact,
        e_nu_tau=e_nu,
        expected_qv=expected_qv(params, tuning.tau, h, nu_tau=e_nu),
        overlap=overlap,
    )


# ---------------------------------------------------------------------------
# Expansions
# ---------------------------------------------------------------------------


def _branch(b: float, c: float) -> str:
    if b >= -0.5 and c < -b:
        return "A"
    if b < -0.5 and c < 1.0 + b:
        return "B"
    raise RateConstraintError(f"rates (b={b!r}, c={c!r}) fall outside both admissible branches")


def leading_term_overlap(
    params: CirParams, tuning: Tuning, conditional_nu_tau: float | None = None
) -> float:
    """Leading bias term for overlapping windows as lambda, h -> 0."""
    m = e_nu_tau(params, tuning.tau) if conditional_nu_tau is None else conditional_nu_tau
    if _branch(tuning.b, tuning.c) == "B":
        return -params.gamma**2 * m * tuning.h
    return fm.overlap_leading(m, params.gamma, tuning.kappa, tuning.delta_n, tuning.b, tuning.h)


def leading_term_overlap_general(
    m: float, gamma: float, beta: float, tuning: Tuning
) -> float:
    """CKLS form of the leading term: the diffusion addendum becomes gamma^2 m^{2 beta}."""
    if beta < 0.5:
        raise ConfigError(f"beta must be >= 1/2, got {beta!r}")
    if _branch(tuning.b, tuning.c) == "B":
        return -(gamma**2) * m ** (2.0 * beta) * tuning.h
    return fm.overlap_leading(m, gamma, tuning.kappa, tuning.delta_n, tuning.b, tuning.h, beta)


def expansion_coeffs(
    params: CirParams, tau: float, h: float, nu_tau: float | None = None
) -> ExpansionCoeffs:
    m = e_nu_tau(params, tau) if nu_tau is None else nu_tau
    return ExpansionCoeffs(*fm.expansion_terms(params.alpha, params.theta, params.gamma, m, h))


def leading_bias_no_overlap(params: CirParams, tuning: Tuning) -> float:
    """a1 Delta_N + a2 / (k_N Delta_N) + a3 k_N delta_N / Delta_N."""
    _branch(tuning.b, tuning.c)
    return expansion_coeffs(params, tuning.tau, tuning.h).leading(tuning)


def no_overlap_threshold(
    params: CirParams, tau: float, h: float, lam: float
) -> NoOverlapThreshold:
    """Positive root of a3 kappa^2 + a1 lam^2 kappa + a2 = 0 and delta* = (lam / kappa)^4.

    With two positive roots the smaller one is returned (the larger delta*).
    """
    co = expansion_coeffs(params, tau, h)
    lin = co.a1 * lam * lam
    roots: list[float] = []
    if co.a3 == 0.0:
        if lin != 0.0:
            roots.append(-co.a2 / lin)
    else:
        disc = lin * lin - 4.0 * co.a3 * co.a2
        if disc >= 0.0:
            sq = math.sqrt(disc)
            # numerically stable pair of roots
            qv = -0.5 * (lin + math.copysign(sq, lin)) if lin != 0.0 else 0.5 * sq
            if qv != 0.0:
                roots.extend([qv / co.a3, co.a2 / qv])
            else:
                roots.append(0.0)
    positive = sorted(r for r in roots if r > 0.0 and math.isfinite(r))
    if not positive:
        return NoOverlapThreshold(None, None)
    kappa = positive[0]
    return NoOverlapThreshold(kappa, (lam / kappa) ** 4)


def lambda_star(params: CirParams, tau: float, h: float, rtol: float = 1e-12) -> float | None:
    """Largest lam with lam * delta*(lam)^{1/4} <= h: doubling bracket, then Brent."""

    def reach(lam: float) -> float | None:
        res = no_overlap_threshold(params, tau, h, lam)
        return None if res.delta_star is None else lam * res.delta_star**0.25

    lo = None
    trial = h
    for _ in range(200):
        r = reach(trial)
        if r is not None and r <= h:
            lo = trial
            break
        trial /= 2.0
    if lo is None:
        return None
    hi = lo
    for _ in range(200):
        hi *= 2.0
        r = reach(hi)
        if r is None or r > h:
            break
        lo = hi
    else:
        return None
    def slack(lam: float) -> float:
        r = reach(lam)
        return -h if r is None else h - r

    root = brentq(slack, lo, hi, xtol=lo * rtol, rtol=rtol)
    return root if slack(root) >= 0.0 else lo


def overlap_threshold_delta(nu: float, gamma: float, lam: float, c: float) -> float:
    """Mesh above which kappa* windows overlap: (kappa* / lam)^{1 / (c - 1/2)}."""
    if c >= 0.5:
        raise RateConstraintError(f"c must be < 1/2, got {c!r}")
    return (kappa_star(nu, gamma) / lam) ** (1.0 / (c - 0.5))


def noise_divergence_check(
    params: CirParams, tuning: Tuning, noise: NoiseSpec
) -> tuple[float, float]:
    """(k_N delta^2 Delta_N D_N, 4 (Q + V^2) h) for disjoint windows."""
    if tuning.overlap:
        raise ConfigError("noise divergence rate applies to non-overlapping windows")
    resolved = _resolved_noise(noise)
    limit = 0.0
    if resolved is None:
        return 0.0, limit
    v, q = resolved
    limit = 4.0 * (q + v * v) * tuning.h
    d_n = fm.noise_term_no_overlap(
        params.alpha, params.theta, e_nu_tau(params, tuning.tau), v, q,
        tuning.h, tuning.delta_n, tuning.big_delta_n, tuning.k_n,
    )
    return tuning.k_n * tuning.delta_n**2 * tuning.big_delta_n * d_n, limit


def larv_bias(
    params: CirParams, tau: float, k_n: int, delta_n: float, noise: NoiseSpec | None = None
) -> float:
    """E[LARV(tau)] - E[nu(tau)]."""
    x = params.theta * k_n * delta_n
    bias = (params.nu0 - params.alpha) * math.exp(-params.theta * tau) * fm.em1mx(x) / x
    resolved = _resolved_noise(noise)
    if resolved is not None:
        bias += 2.0 * resolved[0] / delta_n
    return float(bias)


def kappa_star(nu_tau: float, gamma: float) -> float:
    """2 sqrt(nu_tau) / gamma."""
    if not (nu_tau > 0 and gamma > 0):
        raise ConfigError(f"kappa_star needs positive inputs, got nu={nu_tau!r}, gamma={gamma!r}")
    return 2.0 * math.sqrt(nu_tau) / gamma


def kappa_star_general(nu_tau: float, gamma: float, beta: float) -> float:
    """2 nu_tau^{1 - beta} / gamma."""
    if not (nu_tau > 0 and gamma > 0):
        raise ConfigError(f"kappa_star needs positive inputs, got nu={nu_tau!r}, gamma={gamma!r}")
    if beta < 0.5:
        raise ConfigError(f"beta must be >= 1/2, got {beta!r}")
    if beta == 0.5:
        return kappa_star(nu_tau, gamma)
    return 2.0 * nu_tau ** (1.0 - beta) / gamma
