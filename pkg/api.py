from __future__ import annotations

import math
from typing import Any, Dict, List

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from kappa_mu_relay import analytic
from kappa_mu_relay.analytic import OutageMethod, OutageResult
from kappa_mu_relay.errors import DomainError
from kappa_mu_relay.experiments.sweep import SweepSpec, run_sweep
from kappa_mu_relay.mathkern import SeriesPolicy
from kappa_mu_relay.sysmodel import MonteCarloReport, SystemParams, mc_outage


class OutageRequest(BaseModel):
    params: SystemParams = Field(default_factory=SystemParams, description="Relay scenario.")
    methods: List[OutageMethod] = Field(
        default_factory=list, description="Methods to run; empty means every applicable one."
    )
    policy: SeriesPolicy | None = None
    mc_trials: int | None = Field(default=None, ge=1, description="Also run a Monte Carlo estimate.")
    seed: int | None = None


class OutageResponse(BaseModel):
    results: List[OutageResult] = Field(default_factory=list)
    mc: MonteCarloReport | None = None


class SweepResponse(BaseModel):
    columns: List[str]
    rows: List[Dict[str, Any]] = Field(default_factory=list)


router = APIRouter(prefix="/api", tags=["outage"])


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


@router.post("/outage", response_model=OutageResponse)
def compute_outage(request: OutageRequest) -> OutageResponse:
    """Closed-form outage for every requested (or applicable) method."""
    methods = request.methods or analytic.applicable_methods(request.params)
    try:
        results = [analytic.evaluate(request.params, method, request.policy) for method in methods]
    except DomainError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc

    mc = None
    if request.mc_trials is not None:
        mc = mc_outage(request.params, request.mc_trials, request.seed)
    return OutageResponse(results=results, mc=mc)


@router.post("/sweep", response_model=SweepResponse)
def compute_sweep(spec: SweepSpec) -> SweepResponse:
    """Runs a sweep; cells of methods that do not apply to a row are null."""
    rows = run_sweep(spec)
    return SweepResponse(
        columns=spec.columns(),
        rows=[{key: _json_safe(value) for key, value in row.record().items()} for row in rows],
    )
