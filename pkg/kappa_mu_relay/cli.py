"""Command-line front end.

Usage:
  kappa-mu-relay outage [--alpha 0.06 --ps 0.5 ...] [--method unified,rice]
  kappa-mu-relay sweep (--spec FILE | --scenario NAME) [--output out.csv]
  kappa-mu-relay optimal-alpha [parameter overrides]
  kappa-mu-relay validate [--trials N] [--grid_points N] [--scenario NAME]

Parameter overrides: --ps --eta --alpha --d1 --d2 --xi1 --xi2 --xi3
--sigma_d2 --sigma_r --c_th, --kappa/--mu/--omega for all three links and
--kappa1..3/--mu1..3/--omega1..3 for one link. Hyphens and underscores are
interchangeable in flag names.
"""

from __future__ import annotations

import logging
import os
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Sequence, TextIO

import immutabledict
from absl import app, flags
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from tabulate import tabulate

from . import __version__, analytic
from .analytic import OutageMethod
from .errors import DomainError
from .experiments import scenarios, sweep, validate
from .experiments.optimize import optimal_alpha
from .mathkern import SeriesPolicy
from .sysmodel import SystemParams, expand_path, mc_outage, with_overrides

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Flag name -> SystemParams path. Group aliases come first so that a
# per-link flag given alongside them wins.
OVERRIDE_FLAGS: immutabledict.immutabledict[str, str] = immutabledict.immutabledict(
    {
        "kappa": "kappa",
        "mu": "mu",
        "omega": "omega",
        **{f"{field}{i}": f"link{i}.{field}" for field in ("kappa", "mu", "omega") for i in (1, 2, 3)},
        "ps": "ps",
        "eta": "eta",
        "alpha": "alpha",
        "d1": "d1",
        "d2": "d2",
        "xi1": "xi1",
        "xi2": "xi2",
        "xi3": "xi3",
        "sigma_d2": "sigma_d2",
        "sigma_r": "sigma_r",
        "c_th": "c_th",
    }
)


class Subcommand(str, Enum):
    OUTAGE = "outage"
    SWEEP = "sweep"
    OPTIMAL_ALPHA = "optimal-alpha"
    VALIDATE = "validate"


class RunConfig(BaseModel):
    """A fully parsed command line."""

    model_config = ConfigDict(frozen=True)

    subcommand: Subcommand
    spec: str | None = None
    scenario: str | None = None
    overrides: dict[str, float] = Field(default_factory=dict)
    output: str = "-"
    log_level: str = "INFO"
    seed: int | None = None
    trials: int | None = Field(default=None, ge=1)
    workers: int | None = Field(default=None, ge=1)
    fixed_terms: int | None = Field(default=None, ge=1)
    rel_tol: float | None = Field(default=None, gt=0.0)
    methods: list[OutageMethod] = Field(default_factory=list)
    grid_points: int = Field(default=0, ge=0)

    def to_argv(self) -> list[str]:
        """Flags that parse back to this config."""
        argv = [self.subcommand.value]
        for name in ("spec", "scenario", "seed", "trials", "workers", "fixed_terms", "rel_tol"):
            value = getattr(self, name)
            if value is not None:
                argv.append(f"--{name}={value!r}" if isinstance(value, float) else f"--{name}={value}")
        for flag, value in self.overrides.items():
            argv.append(f"--{flag}={value!r}")
        if self.methods:
            argv.append("--method=" + ",".join(m.value for m in self.methods))
        if self.grid_points:
            argv.append(f"--grid_points={self.grid_points}")
        argv += [f"--output={self.output}", f"--log_level={self.log_level}"]
        return argv

    def policy(self) -> SeriesPolicy | None:
        """SeriesPolicy from --fixed_terms/--rel_tol; None defers to the environment."""
        if self.fixed_terms is None and self.rel_tol is None:
            return None
        env = SeriesPolicy.from_env()
        return env.model_copy(
            update={
                "fixed_terms": self.fixed_terms if self.fixed_terms is not None else env.fixed_terms,
                "rel_tol": self.rel_tol if self.rel_tol is not None else env.rel_tol,
            }
        )

    def sweep_spec(self) -> sweep.SweepSpec | None:
        if self.spec is not None:
            return sweep.load_spec(self.spec)
        if self.scenario is not None:
            return scenarios.scenario_spec(self.scenario)
        return None

    def system_params(self) -> SystemParams:
        spec = self.sweep_spec()
        base = spec.base if spec is not None else SystemParams()
        paths = {OVERRIDE_FLAGS[flag]: value for flag, value in self.overrides.items()}
        return with_overrides(base, paths)


def _define_flags(fv: flags.FlagValues) -> None:
    flags.DEFINE_string("spec", None, "Sweep spec file (JSON).", flag_values=fv)
    flags.DEFINE_enum("scenario", None, scenarios.scenario_names(), "Built-in scenario.", flag_values=fv)
    flags.mark_flags_as_mutual_exclusive(["spec", "scenario"], flag_values=fv)
    flags.DEFINE_string("output", "-", "Output file; '-' is standard output.", flag_values=fv)
    flags.DEFINE_integer("seed", None, "Monte Carlo seed (default KMR_SEED).", flag_values=fv)
    flags.DEFINE_integer("trials", None, "Monte Carlo trials.", flag_values=fv)
    flags.DEFINE_integer("workers", None, "Monte Carlo worker threads.", flag_values=fv)
    flags.DEFINE_integer("fixed_terms", None, "Truncate every series at this many terms.", flag_values=fv)
    flags.DEFINE_float("rel_tol", None, "Adaptive series tolerance.", flag_values=fv)
    flags.DEFINE_list("method", [], "Outage methods (default: all applicable).", flag_values=fv)
    flags.DEFINE_integer("grid_points", 0, "validate: size of the randomized oracle grid.", flag_values=fv)
    flags.DEFINE_string(
        "log_level", os.getenv("KMR_LOG_LEVEL", "INFO"), "Logging level.", flag_values=fv
    )
    for flag, path in OVERRIDE_FLAGS.items():
        flags.DEFINE_float(flag, None, f"Override {path}.", flag_values=fv)


def _normalize(argv: Sequence[str]) -> list[str]:
    """Maps --fixed-terms style names onto their underscore flags."""
    normalized = []
    for token in argv:
        if token.startswith("--") and len(token) > 2:
            name, sep, value = token[2:].partition("=")
            token = "--" + name.replace("-", "_") + sep + value
        normalized.append(token)
    return normalized


def _flags_by_path(overrides: dict[str, float]) -> dict[str, str]:
    """SystemParams field path -> the flag that set it."""
    by_path = {}
    for flag in overrides:
        for path in expand_path(OVERRIDE_FLAGS[flag]):
            by_path[path] = flag
    return by_path


def _usage_from_validation(exc: ValidationError, flag_for: dict[str, str] | None = None) -> app.UsageError:
    flag_for = flag_for or {}
    problems = []
    for error in exc.errors():
        loc = ".".join(str(part) for part in error["loc"])
        head = str(error["loc"][0]) if error["loc"] else loc
        flag = flag_for.get(loc, flag_for.get(head, loc))
        problems.append(f"--{flag}: {error['msg']}")
    return app.UsageError("; ".join(problems))


def parse_args(argv: Sequence[str]) -> RunConfig:
    """Parses a command line (without the program name) into a RunConfig.

    Raises:
      app.UsageError: naming the offending flag or argument.
    """
    fv = flags.FlagValues()
    _define_flags(fv)
    try:
        positional = fv(["kappa-mu-relay", *_normalize(argv)])[1:]
    except flags.Error as exc:
        raise app.UsageError(str(exc)) from exc

    if not positional:
        raise app.UsageError(
            "missing subcommand; expected one of " + ", ".join(c.value for c in Subcommand)
        )
    if len(positional) > 1:
        raise app.UsageError(f"unexpected arguments: {' '.join(positional[1:])}")
    try:
        subcommand = Subcommand(positional[0])
    except ValueError as exc:
        raise app.UsageError(f"unknown subcommand {positional[0]!r}") from exc

    if fv["spec"].present and not Path(fv.spec).is_file():
        raise app.UsageError(f"--spec: Spec file not found: {fv.spec}")
    if subcommand is Subcommand.SWEEP and fv.spec is None and fv.scenario is None:
        raise app.UsageError("sweep needs --spec or --scenario")

    overrides = {flag: fv[flag].value for flag in OVERRIDE_FLAGS if fv[flag].present}
    try:
        config = RunConfig(
            subcommand=subcommand,
            spec=fv.spec,
            scenario=fv.scenario,
            overrides=overrides,
            output=fv.output,
            log_level=fv.log_level.upper(),
            seed=fv.seed,
            trials=fv.trials,
            workers=fv.workers,
            fixed_terms=fv.fixed_terms,
            rel_tol=fv.rel_tol,
            methods=fv.method,
            grid_points=fv.grid_points,
        )
    except ValidationError as exc:
        raise _usage_from_validation(exc, {"methods": "method"}) from exc
    if logging.getLevelName(config.log_level) == f"Level {config.log_level}":
        raise app.UsageError(f"--log_level: unknown level {config.log_level!r}")

    # Overrides must describe a valid scenario before anything runs.
    try:
        config.system_params()
    except DomainError as exc:
        cause = exc.__cause__
        if isinstance(cause, ValidationError):
            raise _usage_from_validation(cause, _flags_by_path(config.overrides)) from exc
        raise app.UsageError(str(exc)) from exc
    except (ValueError, FileNotFoundError) as exc:
        raise app.UsageError(f"--spec: {exc}") from exc
    return config


def _write(text: str, output: str) -> None:
    if output == "-":
        print(text)
        return
    with open(output, "w", encoding="utf-8") as f:
        f.write(text + "\n")


def _methods(config: RunConfig, params: SystemParams) -> list[OutageMethod]:
    return config.methods or analytic.applicable_methods(params)


def _run_outage(config: RunConfig) -> None:
    params = config.system_params()
    table: list[list[Any]] = []
    for method in _methods(config, params):
        try:
            result = analytic.evaluate(params, method, config.policy())
        except DomainError as exc:
            logger.warning("%s not applicable: %s", method.value, exc)
            continue
        table.append(
            [method.value, result.value, result.raw_value, result.converged, result.terms_used or "-"]
        )
    if config.trials is not None:
        report = mc_outage(params, config.trials, config.seed, config.workers)
        table.append(["monte_carlo", report.estimate, f"+/- {report.stderr:.3g}", True, report.trials])
    headers = ["method", "outage", "raw", "converged", "terms"]
    _write(tabulate(table, headers=headers, floatfmt=".10g"), config.output)


def _run_sweep(config: RunConfig) -> None:
    spec = config.sweep_spec()
    update: dict[str, Any] = {
        "base": config.system_params(),
    }
    if config.policy() is not None:
        update["policy"] = config.policy()
    if config.trials is not None:
        update["mc_trials"] = config.trials
    if config.seed is not None:
        update["seed"] = config.seed
    if config.workers is not None:
        update["workers"] = config.workers
    if config.methods:
        update["methods"] = config.methods
    spec = sweep.SweepSpec.model_validate({**spec.model_dump(), **update})
    rows = sweep.run_sweep(spec)
    sweep.emit_csv(rows, config.output, spec.columns())


def _run_optimal_alpha(config: RunConfig) -> None:
    params = config.system_params()
    table = []
    for method in _methods(config, params):
        try:
            best = optimal_alpha(params, method, policy=config.policy())
        except DomainError as exc:
            logger.warning("%s not applicable: %s", method.value, exc)
            continue
        table.append([method.value, best.alpha, best.outage, best.unimodal])
    headers = ["method", "alpha_star", "outage_star", "unimodal"]
    _write(tabulate(table, headers=headers, floatfmt=".8g"), config.output)


def _run_validate(config: RunConfig) -> None:
    if config.grid_points:
        cases = validate.oracle_grid(
            config.grid_points,
            seed=config.seed if config.seed is not None else 2024,
            trials=config.trials,
            policy=config.policy(),
        )
        table = [
            [i, c.report.analytic.value, c.report.mc.estimate, c.report.mc.stderr, c.report.z_score, c.report.within]
            for i, c in enumerate(cases)
        ]
        headers = ["point", "unified", "mc_estimate", "mc_stderr", "z", "within_3sigma"]
        _write(tabulate(table, headers=headers, floatfmt=".8g"), config.output)
        return

    spec = config.sweep_spec()
    if spec is not None:
        gap_40 = validate.truncation_gap(spec, 20, 40)
        gap_adaptive = validate.truncation_gap(spec, 20, None)
        table = [["20 vs 40 terms", gap_40], ["20 terms vs adaptive", gap_adaptive]]
        _write(tabulate(table, headers=["comparison", "max_abs_diff"], floatfmt=".3g"), config.output)
        return

    reports = validate.validate_point(
        config.system_params(), config.trials, config.seed, policy=config.policy(), workers=config.workers
    )
    table = [
        [r.method.value, r.analytic.value, r.mc.estimate, r.mc.stderr, r.z_score, r.within] for r in reports
    ]
    headers = ["method", "analytic", "mc_estimate", "mc_stderr", "z", "within_3sigma"]
    _write(tabulate(table, headers=headers, floatfmt=".8g"), config.output)


_COMMANDS = immutabledict.immutabledict(
    {
        Subcommand.OUTAGE: _run_outage,
        Subcommand.SWEEP: _run_sweep,
        Subcommand.OPTIMAL_ALPHA: _run_optimal_alpha,
        Subcommand.VALIDATE: _run_validate,
    }
)


def help_text() -> str:
    fv = flags.FlagValues()
    _define_flags(fv)
    return f"{__doc__}\n{fv.get_help()}"


def execute(config: RunConfig, stream: TextIO = sys.stderr) -> int:
    """Runs a parsed command; non-convergence is reported, never fatal."""
    logging.basicConfig(level=config.log_level, format=LOG_FORMAT, stream=stream, force=True)
    logger.debug("running %s", config)
    _COMMANDS[config.subcommand](config)
    return 0


def main(argv: list[str]) -> int:
    load_dotenv()
    args = list(argv[1:])
    if any(arg in ("--help", "-h") for arg in args):
        print(help_text())
        return 0
    if "--version" in args:
        print(f"kappa-mu-relay {__version__}")
        return 0
    return execute(parse_args(args))


def _passthrough(argv: list[str]) -> list[str]:
    # flags are parsed per call in parse_args; the global registry only sees argv[0]
    flags.FLAGS(argv[:1])
    return argv


def run() -> None:
    app.run(main, flags_parser=_passthrough)


if __name__ == "__main__":
    run()
