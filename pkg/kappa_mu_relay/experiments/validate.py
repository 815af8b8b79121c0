"""Cross-checks of the closed forms against Monte Carlo and against themselves."""

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict

from .. import analytic
from ..analytic import OutageMethod, OutageResult
from ..fading import KappaMuParams
from ..mathkern import SeriesPolicy
from ..sysmodel import MonteCarloReport, SystemParams, mc_outage, with_overrides
from .sweep import SweepSpec, run_sweep

logger = logging.getLogger(__name__)


class ValidationReport(BaseModel):
    """One analytic method checked against a Monte Carlo estimate."""

    model_config = ConfigDict(frozen=True)

    method: OutageMethod
    analytic: OutageResult
    mc: MonteCarloReport
    z_score: float
    within: bool


class OracleCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: SystemParams
    report: ValidationReport


class HighSnrPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    ps: float
    bessel_argument: float
    exact: float
    approx: float
    rel_error: float


def validate_point(
    sys: SystemParams,
    trials: int | None = None,
    seed: int | None = None,
    sigmas: float = 3.0,
    policy: SeriesPolicy | None = None,
    workers: int | None = None,
) -> list[ValidationReport]:
    """Compares every exact method applicable to sys with one MC estimate."""
    mc = mc_outage(sys, trials, seed, workers)
    reports = []
    for method in analytic.applicable_methods(sys):
        if method is OutageMethod.RAYLEIGH_HIGHSNR:
            continue
        result = analytic.evaluate(sys, method, policy)
        z = mc.z_score(result.value)
        within = mc.agrees(result.value, sigmas)
        if not within:
            logger.warning(
                "%s outage %.6g is %.2f standard errors from MC %.6g",
                method.value,
                result.value,
                z,
                mc.estimate,
            )
        reports.append(ValidationReport(method=method, analytic=result, mc=mc, z_score=z, within=within))
    return reports


def random_params(rng: np.random.Generator, base: SystemParams | None = None) -> SystemParams:
    """One draw from kappa in [0, 5], mu in {1, 2, 3}, alpha in [0.05, 0.9], Ps in [0.1, 2]."""
    base = base or SystemParams()
    links = {
        name: KappaMuParams(kappa=float(rng.uniform(0.0, 5.0)), mu=float(rng.integers(1, 4)))
        for name in ("link1", "link2", "link3")
    }
    scalars = {"alpha": float(rng.uniform(0.05, 0.9)), "ps": float(rng.uniform(0.1, 2.0))}
    return base.model_copy(update={**links, **scalars})


def oracle_grid(
    points: int = 50,
    seed: int = 2024,
    trials: int | None = None,
    sigmas: float = 3.0,
    policy: SeriesPolicy | None = None,
    base: SystemParams | None = None,
) -> list[OracleCase]:
    """Unified outage against Monte Carlo over a randomized parameter grid."""
    grid_rng = np.random.default_rng(seed)
    mc_seeds = np.random.SeedSequence(seed).spawn(points)
    cases = []
    for index in range(points):
        params = random_params(grid_rng, base)
        mc = mc_outage(params, trials, int(mc_seeds[index].generate_state(1)[0]))
        result = analytic.outage_unified(params, policy)
        report = ValidationReport(
            method=OutageMethod.UNIFIED,
            analytic=result,
            mc=mc,
            z_score=mc.z_score(result.value),
            within=mc.agrees(result.value, sigmas),
        )
        cases.append(OracleCase(params=params, report=report))
    failures = sum(not case.report.within for case in cases)
    logger.info("oracle grid: %d/%d points within %.1f sigma", points - failures, points, sigmas)
    return cases


def truncation_gap(spec: SweepSpec, terms: int = 20, reference: int | None = 40) -> float:
    """Largest |outage| change between two truncations over a sweep's grid.

    reference=None compares against the adaptive policy.
    """
    coarse = spec.model_copy(update={"policy": SeriesPolicy.fixed(terms), "mc_trials": None})
    fine_policy = SeriesPolicy.fixed(reference) if reference is not None else SeriesPolicy()
    fine = spec.model_copy(update={"policy": fine_policy, "mc_trials": None})

    gap = 0.0
    for row_a, row_b in zip(run_sweep(coarse), run_sweep(fine)):
        for key, value in row_a.outcomes.items():
            if key.startswith("outage_") and not math.isnan(value):
                gap = max(gap, abs(value - row_b.outcomes[key]))
    logger.info("truncation gap %d vs %s terms on %r: %.3g", terms, reference or "adaptive", spec.name, gap)
    return gap


def highsnr_sweep(
    sys: SystemParams,
    threshold: float = 0.01,
    growth: float = 10.0,
    max_steps: int = 64,
) -> list[HighSnrPoint]:
    """Raises Ps until 2 sqrt(upsilon / a) <= threshold, recording the error of exp(-b / upsilon)."""
    points = []
    current = sys
    for _ in range(max_steps):
        argument = 2.0 * math.sqrt(current.upsilon / current.a)
        exact = analytic.outage_rayleigh(current).value
        approx = analytic.outage_rayleigh_highsnr(current).value
        rel_error = abs(approx - exact) / exact if exact > 0 else math.inf
        points.append(
            HighSnrPoint(
                ps=current.ps, bessel_argument=argument, exact=exact, approx=approx, rel_error=rel_error
            )
        )
        if argument <= threshold:
            break
        current = with_overrides(current, {"ps": current.ps * growth})
    else:
        logger.warning("high-SNR sweep stopped after %d steps above %.3g", max_steps, threshold)
    return points
