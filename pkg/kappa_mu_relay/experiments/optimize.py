"""Search for the energy-harvesting time factor that minimizes outage."""

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize

from .. import analytic
from ..analytic import OutageMethod
from ..mathkern import SeriesPolicy
from ..sysmodel import SystemParams, with_overrides

logger = logging.getLogger(__name__)

ALPHA_RANGE = (0.01, 0.99)

# Outage differences below this are treated as flat when counting local minima.
_FLAT_TOL = 1e-12


class AlphaOptimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    outage: float
    unimodal: bool
    grid_alpha: list[float]
    grid_outage: list[float]


def count_local_minima(values: np.ndarray, tol: float = _FLAT_TOL) -> int:
    """Number of descending-to-ascending turns, ignoring flat stretches."""
    steps = np.diff(np.asarray(values, dtype=float))
    signs = np.sign(np.where(np.abs(steps) <= tol, 0.0, steps))
    signs = signs[signs != 0]
    return int(np.count_nonzero((signs[:-1] < 0) & (signs[1:] > 0)))


def optimal_alpha(
    sys: SystemParams,
    method: OutageMethod | str,
    grid: int = 99,
    refine: float = 1e-4,
    policy: SeriesPolicy | None = None,
) -> AlphaOptimum:
    """Grid scan of alpha over [0.01, 0.99] and golden-section refinement.

    The refined point replaces the grid minimum only when it is strictly
    better, so the result never exceeds any scanned outage.
    """
    method = OutageMethod(method)
    policy = policy or SeriesPolicy.from_env()

    def outage_at(alpha: float) -> float:
        return analytic.evaluate(with_overrides(sys, {"alpha": alpha}), method, policy).value

    alphas = np.linspace(*ALPHA_RANGE, grid)
    values = np.array([outage_at(alpha) for alpha in alphas])
    best = int(np.argmin(values))
    alpha_star, outage_star = float(alphas[best]), float(values[best])

    minima = count_local_minima(values)
    unimodal = minima <= 1
    if not unimodal:
        logger.warning(
            "%s outage has %d local minima in alpha; reporting the global grid minimum",
            method.value,
            minima,
        )

    if 0 < best < grid - 1:
        bracket = (float(alphas[best - 1]), alpha_star, float(alphas[best + 1]))
        try:
            refined = optimize.minimize_scalar(
                outage_at, bracket=bracket, method="golden", options={"xtol": refine}
            )
        except ValueError as exc:
            # ties with a neighbour do not form a strict bracket
            logger.debug("golden refinement skipped: %s", exc)
        else:
            if ALPHA_RANGE[0] <= refined.x <= ALPHA_RANGE[1] and refined.fun < outage_star:
                alpha_star, outage_star = float(refined.x), float(refined.fun)
    else:
        logger.info("%s outage is minimized at the alpha range edge %.4g", method.value, alpha_star)

    logger.debug("optimal alpha for %s: %.6g (outage %.6g)", method.value, alpha_star, outage_star)
    return AlphaOptimum(
        alpha=alpha_star,
        outage=outage_star,
        unimodal=unimodal,
        grid_alpha=alphas.tolist(),
        grid_outage=values.tolist(),
    )
