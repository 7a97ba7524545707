"""Property suite run by ``harness selftest``.

- route equivalence: moment assembly minus E[QV] equals the closed-form total
  on random configurations of both window regimes and all parameter sets;
- annihilation: the conditional overlap leading term vanishes at the
  bias-optimal kappa (CIR and CKLS forms);
- boundary: the shared-window cross-moment pieces vanish when W_N = Delta_N.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from psrv_lab.biascalc import (
    bias_closed_form,
    bias_moment_assembly,
    kappa_star_general,
    leading_term_overlap,
    leading_term_overlap_general,
    overlap_components,
)
from psrv_lab.estimator import Tuning
from psrv_lab.logging_utils import RunTimer
from psrv_lab.sde import CirParams
from psrv_lab.utils import DEFAULT_LAYOUT

from .presets import PARAMETER_SETS

logger = logging.getLogger(__name__)

ROUTE_RTOL = 1e-8
ANNIHILATION_RTOL = 1e-12
BOUNDARY_RTOL = 1e-10
MESH_SECONDS = (1.0, 5.0, 15.0, 60.0, 300.0)


@dataclass
class SelftestReport:
    checks: int = 0
    failures: list[str] = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, ok: bool, message: str) -> None:
        self.checks += 1
        if not ok:
            self.failures.append(message)
            logger.error("FAILED: %s", message)


def _cir(name: str) -> CirParams:
    ps = PARAMETER_SETS[name]
    return CirParams(ps.alpha, ps.theta, ps.gamma, ps.nu0)


def random_case(rng: np.random.Generator) -> tuple[str, CirParams, Tuning, str]:
    """A random (parameter set, tuning, anchor) with the overlap regime drawn at even odds."""
    name = str(rng.choice(sorted(PARAMETER_SETS)))
    params = _cir(name)
    delta = DEFAULT_LAYOUT.seconds(float(rng.choice(MESH_SECONDS)))
    n = int(rng.integers(12, 200))
    lam_n = int(rng.integers(1, n + 1))
    if rng.random() < 0.5:
        k = int(rng.integers(1, lam_n + 1))
    else:
        k = int(rng.integers(lam_n + 1, lam_n + 400))
    anchor = "tau" if rng.random() < 0.5 else "start"
    tau = float(rng.uniform(0.0, 10.0)) * DEFAULT_LAYOUT.day()
    if anchor == "start":
        tau += k * delta
    tuning = Tuning.from_multiples(delta, k, lam_n, n * delta, tau)
    return name, params, tuning, anchor


def check_route_equivalence(report: SelftestReport, n_cases: int, rng: np.random.Generator) -> None:
    overlap_seen = {True: 0, False: 0}
    for _ in range(n_cases):
        name, params, tuning, anchor = random_case(rng)
        assembled = bias_moment_assembly(params, tuning, anchor)
        closed = bias_closed_form(params, tuning, anchor=anchor)
        gap = abs(assembled - closed.expected_qv - closed.total)
        scale = max(abs(closed.total), closed.expected_qv)
        overlap_seen[tuning.overlap] += 1
        report.record(
            gap <= ROUTE_RTOL * scale,
            f"route gap {gap:.3e} (scale {scale:.3e}) for {name}, k={tuning.k_n}, "
            f"lambda={tuning.lambda_n}, n={tuning.n}, anchor={anchor}",
        )
    logger.info("Route equivalence: %d overlapping, %d disjoint cases", overlap_seen[True], overlap_seen[False])


def check_annihilation(report: SelftestReport, n_cases: int, rng: np.random.Generator) -> None:
    delta = DEFAULT_LAYOUT.minutes(1.0)
    h = DEFAULT_LAYOUT.day()
    for _ in range(n_cases):
        nu = float(rng.uniform(0.01, 1.0))
        gamma = float(rng.uniform(0.1, 1.0))
        params = CirParams(alpha=nu, theta=gamma**2 / nu, gamma=gamma, nu0=nu)
        kappa = kappa_star_general(nu, gamma, 0.5)
        tuning = Tuning(delta, -0.5, 0.25, kappa, 0.0006, h)
        lead = leading_term_overlap(params, tuning, conditional_nu_tau=nu)
        scale = gamma**2 * nu * h
        report.record(
            abs(lead) <= ANNIHILATION_RTOL * scale,
            f"leading term {lead:.3e} at kappa*={kappa:.6g} (nu={nu:.6g}, gamma={gamma:.6g})",
        )
        for beta in (1.0, 1.5):
            kappa_b = kappa_star_general(nu, gamma, beta)
            lead_b = leading_term_overlap_general(nu, gamma, beta, tuning.with_kappa(kappa_b))
            scale_b = gamma**2 * nu ** (2.0 * beta) * h
            report.record(
                abs(lead_b) <= ANNIHILATION_RTOL * scale_b,
                f"CKLS leading term {lead_b:.3e} at beta={beta} (nu={nu:.6g}, gamma={gamma:.6g})",
            )


def check_boundary(report: SelftestReport) -> None:
    for name in sorted(PARAMETER_SETS):
        params = _cir(name)
        for mesh in MESH_SECONDS:
            delta = DEFAULT_LAYOUT.seconds(mesh)
            for lam_n in (1, 3, 10):
                tuning = Tuning.from_multiples(delta, lam_n, lam_n, 60 * delta, 0.0)
                o1, o2, o3, o4 = overlap_components(params, tuning)
                rest = float(np.max(np.abs(o2 + o3 + o4)))
                scale = float(np.max(np.abs(o1)))
                report.record(
                    rest <= BOUNDARY_RTOL * scale,
                    f"shared-window terms {rest:.3e} at W_N = Delta_N ({name}, {mesh:g}s, lambda={lam_n})",
                )


def run_selftest(n_route: int = 200, n_annihilation: int = 100, seed: int = 0) -> SelftestReport:
    report = SelftestReport()
    rng = np.random.default_rng(seed)
    with RunTimer("selftest") as timer:
        logger.info("=== Route equivalence (%d cases) ===", n_route)
        check_route_equivalence(report, n_route, rng)
        logger.info("=== Annihilation (%d cases) ===", n_annihilation)
        check_annihilation(report, n_annihilation, rng)
        logger.info("=== Boundary ===")
        check_boundary(report)
    report.elapsed_s = timer.elapsed_s
    logger.info(
        "Selftest: %d checks, %d failures, %.1f s", report.checks, len(report.failures), report.elapsed_s
    )
    return report
