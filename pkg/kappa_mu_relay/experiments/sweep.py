"""Parameter-grid sweeps over SystemParams with CSV output."""

from __future__ import annotations

import itertools
import logging
import math
import sys as _sys
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .. import analytic
from ..analytic import OutageMethod
from ..errors import DomainError
from ..mathkern import SeriesPolicy
from ..sysmodel import SystemParams, expand_path, mc_outage, with_overrides
from ..utils.utils import load_json_file
from .optimize import optimal_alpha

logger = logging.getLogger(__name__)


class SweepAxis(BaseModel):
    """One CSV column; each value is written to every target times its factor."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    label: str = Field(min_length=1)
    targets: list[str] = Field(default_factory=list)
    factors: list[float] | None = None
    values: list[float] = Field(min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _default_targets(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("targets"):
            data = {**data, "targets": [data.get("label")]}
        return data

    @model_validator(mode="after")
    def _check_targets(self) -> "SweepAxis":
        for target in self.targets:
            expand_path(target)
        if self.factors is not None and len(self.factors) != len(self.targets):
            raise ValueError(
                f"axis {self.label!r}: {len(self.factors)} factors for {len(self.targets)} targets"
            )
        return self

    def overrides(self, value: float) -> dict[str, float]:
        factors = self.factors or [1.0] * len(self.targets)
        return {target: factor * value for target, factor in zip(self.targets, factors)}


class SweepSpec(BaseModel):
    """A grid of scenarios and the outage methods to evaluate on each."""

    model_config = ConfigDict(frozen=True)

    name: str = "sweep"
    base: SystemParams = Field(default_factory=SystemParams)
    axes: list[SweepAxis] = Field(default_factory=list)
    methods: list[OutageMethod] = Field(default_factory=lambda: [OutageMethod.UNIFIED], min_length=1)
    mc_trials: int | None = Field(default=None, ge=1)
    seed: int = 2024
    workers: int = Field(default=1, ge=1)
    policy: SeriesPolicy = Field(default_factory=SeriesPolicy.from_env)
    optimize_alpha: bool = False
    alpha_grid: int = Field(default=99, ge=3)
    alpha_tol: float = Field(default=1e-4, gt=0.0)

    @field_validator("methods")
    @classmethod
    def _unique_methods(cls, methods: list[OutageMethod]) -> list[OutageMethod]:
        if len(set(methods)) != len(methods):
            raise ValueError(f"methods must be unique, got {[m.value for m in methods]}")
        return methods

    @model_validator(mode="after")
    def _check_axes(self) -> "SweepSpec":
        labels = [axis.label for axis in self.axes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"axis labels must be unique, got {labels}")
        if self.optimize_alpha and any(
            "alpha" in axis.targets for axis in self.axes
        ):
            raise ValueError("an alpha axis cannot be combined with optimize_alpha")
        return self

    def columns(self) -> list[str]:
        """CSV header, in output order."""
        columns = [axis.label for axis in self.axes]
        for method in self.methods:
            if self.optimize_alpha:
                columns += [f"alpha_star_{method.value}", f"outage_star_{method.value}", f"unimodal_{method.value}"]
                continue
            columns.append(f"outage_{method.value}")
            if method.is_series:
                columns += [f"terms_{method.value}", f"converged_{method.value}"]
        if self.mc_trials is not None:
            columns += ["mc_estimate", "mc_stderr"]
        return columns

    def grid(self) -> Iterable[tuple[float, ...]]:
        """Grid points in lexicographic axis order."""
        return itertools.product(*(axis.values for axis in self.axes))


class SweepRow(BaseModel):
    """One grid point: axis values followed by per-method outcomes."""

    index: int
    params: dict[str, float]
    outcomes: dict[str, Any]

    def record(self) -> dict[str, Any]:
        return {**self.params, **self.outcomes}


def load_spec(path: str | Path) -> SweepSpec:
    """Reads a JSON sweep spec file."""
    return SweepSpec.model_validate(load_json_file(path))


def row_seed(seed: int, row: int) -> int:
    """Independent Monte Carlo seed for one grid row."""
    return int(np.random.SeedSequence(seed, spawn_key=(row,)).generate_state(1)[0])


def _method_outcomes(spec: SweepSpec, sys: SystemParams | None, method: OutageMethod) -> dict[str, Any]:
    name = method.value
    if spec.optimize_alpha:
        try:
            if sys is None:
                raise DomainError("invalid grid point")
            best = optimal_alpha(sys, method, grid=spec.alpha_grid, refine=spec.alpha_tol, policy=spec.policy)
            return {
                f"alpha_star_{name}": best.alpha,
                f"outage_star_{name}": best.outage,
                f"unimodal_{name}": best.unimodal,
            }
        except DomainError as exc:
            logger.warning("%s skipped at this grid point: %s", name, exc)
            return {f"alpha_star_{name}": math.nan, f"outage_star_{name}": math.nan, f"unimodal_{name}": False}

    try:
        if sys is None:
            raise DomainError("invalid grid point")
        result = analytic.evaluate(sys, method, spec.policy)
    except DomainError as exc:
        logger.warning("%s skipped at this grid point: %s", name, exc)
        outcomes: dict[str, Any] = {f"outage_{name}": math.nan}
        if method.is_series:
            outcomes.update({f"terms_{name}": 0, f"converged_{name}": False})
        return outcomes

    outcomes = {f"outage_{name}": result.value}
    if method.is_series:
        outcomes[f"terms_{name}"] = sum(result.terms_used.values())
        outcomes[f"converged_{name}"] = result.converged
    return outcomes


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Evaluates every grid point of spec; rows come back in grid order."""
    rows = []
    for index, point in enumerate(spec.grid()):
        params = {axis.label: value for axis, value in zip(spec.axes, point)}
        overrides: dict[str, float] = {}
        for axis, value in zip(spec.axes, point):
            overrides.update(axis.overrides(value))
        try:
            sys = with_overrides(spec.base, overrides)
        except DomainError as exc:
            logger.warning("row %d (%s) is not a valid scenario: %s", index, params, exc)
            sys = None

        outcomes: dict[str, Any] = {}
        for method in spec.methods:
            outcomes.update(_method_outcomes(spec, sys, method))
        if spec.mc_trials is not None:
            if sys is None:
                outcomes.update({"mc_estimate": math.nan, "mc_stderr": math.nan})
            else:
                report = mc_outage(sys, spec.mc_trials, row_seed(spec.seed, index), spec.workers)
                outcomes.update({"mc_estimate": report.estimate, "mc_stderr": report.stderr})
        logger.debug("row %d %s -> %s", index, params, outcomes)
        rows.append(SweepRow(index=index, params=params, outcomes=outcomes))
    logger.info("sweep %r: %d rows", spec.name, len(rows))
    return rows


def emit_csv(
    rows: Sequence[SweepRow],
    destination: str | Path | TextIO,
    columns: Sequence[str] | None = None,
) -> None:
    """Writes rows as CSV; "-" is standard output.

    Floats are written with their shortest round-trip repr. An empty row
    list still produces the header when columns are given.
    """
    if columns is None:
        columns = list(rows[0].record()) if rows else []
    frame = pd.DataFrame([row.record() for row in rows], columns=list(columns))
    target = _sys.stdout if destination == "-" else destination
    frame.to_csv(target, index=False, lineterminator="\n", na_rep="nan")
