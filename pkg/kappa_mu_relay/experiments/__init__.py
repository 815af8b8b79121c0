"""Sweeps, alpha optimization, figure scenarios and validation reports."""

from .optimize import AlphaOptimum, optimal_alpha
from .scenarios import SCENARIOS, scenario_names, scenario_spec
from .sweep import SweepAxis, SweepRow, SweepSpec, emit_csv, load_spec, run_sweep
from .validate import highsnr_sweep, oracle_grid, truncation_gap, validate_point

__all__ = [
    "AlphaOptimum",
    "SCENARIOS",
    "SweepAxis",
    "SweepRow",
    "SweepSpec",
    "emit_csv",
    "highsnr_sweep",
    "load_spec",
    "optimal_alpha",
    "oracle_grid",
    "run_sweep",
    "scenario_names",
    "scenario_spec",
    "truncation_gap",
    "validate_point",
]
