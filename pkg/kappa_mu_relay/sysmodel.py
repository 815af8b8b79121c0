"""Full-duplex time-switching DF relay link and its Monte Carlo outage oracle.

The relay harvests energy for a fraction alpha of each frame and forwards in
the remaining (1 - alpha). Its SNR is limited by loop-back interference only,
so gamma_r = 1 / (zeta * h3^2); the destination SNR is gamma_d = a * h1^2 * h2^2.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Mapping

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import fading
from .errors import DomainError
from .fading import KappaMuParams
from .utils.utils import get_env_int

logger = logging.getLogger(__name__)

LINKS = ("link1", "link2", "link3")
LINK_FIELDS = ("kappa", "mu", "omega")
SCALAR_FIELDS = (
    "ps",
    "eta",
    "alpha",
    "d1",
    "d2",
    "xi1",
    "xi2",
    "xi3",
    "sigma_d2",
    "sigma_r",
    "c_th",
)

# Accepted for completeness; neither enters the relay or destination SNR.
_UNUSED_DEFAULTS = {"sigma_r": 0.01, "xi3": 2.7}
# (field, value) pairs already warned about; overrides revalidate every row.
_WARNED_UNUSED: set[tuple[str, float]] = set()

_MC_CHUNK = 1 << 20


class SystemParams(BaseModel):
    """One relay scenario. Defaults are the baseline of the numerical study."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    link1: KappaMuParams = Field(default_factory=KappaMuParams, description="S->R fading.")
    link2: KappaMuParams = Field(default_factory=KappaMuParams, description="R->D fading.")
    link3: KappaMuParams = Field(default_factory=KappaMuParams, description="Loop-back fading.")
    ps: float = Field(default=0.5, gt=0.0, description="Source power, W.")
    eta: float = Field(default=1.0, gt=0.0, le=1.0, description="Harvester efficiency.")
    alpha: float = Field(default=0.06, gt=0.0, lt=1.0, description="EH time factor.")
    d1: float = Field(default=4.0, gt=0.0, description="S->R distance, m.")
    d2: float = Field(default=4.0, gt=0.0, description="R->D distance, m.")
    xi1: float = Field(default=2.7, gt=0.0)
    xi2: float = Field(default=2.7, gt=0.0)
    xi3: float = Field(default=2.7, gt=0.0, description="Loop-back path-loss exponent (unused).")
    sigma_d2: float = Field(default=0.01, gt=0.0, description="Destination noise variance, W.")
    sigma_r: float = Field(default=0.01, gt=0.0, description="Relay noise (unused).")
    c_th: float = Field(default=0.2, ge=0.0, description="Threshold rate, bits/s/Hz.")

    @model_validator(mode="after")
    def _warn_unused(self) -> "SystemParams":
        for name, default in _UNUSED_DEFAULTS.items():
            value = getattr(self, name)
            if value != default and (name, value) not in _WARNED_UNUSED:
                _WARNED_UNUSED.add((name, value))
                logger.warning("%s=%s is accepted but does not enter the model", name, value)
        return self

    @property
    def zeta(self) -> float:
        return self.eta * self.alpha / (1.0 - self.alpha)

    @property
    def b(self) -> float:
        return (1.0 - self.alpha) / (self.eta * self.alpha)

    @property
    def upsilon(self) -> float:
        """SNR threshold 2^(c_th / (1 - alpha)) - 1; inf once it overflows."""
        try:
            return math.expm1(self.c_th / (1.0 - self.alpha) * math.log(2.0))
        except OverflowError:
            return math.inf

    @property
    def a(self) -> float:
        path_loss = self.d1**self.xi1 * self.d2**self.xi2
        return self.zeta * self.ps / (path_loss * self.sigma_d2)

    @property
    def links(self) -> tuple[KappaMuParams, KappaMuParams, KappaMuParams]:
        return self.link1, self.link2, self.link3


def expand_path(path: str) -> list[str]:
    """Resolves a parameter path to the dotted fields it drives.

    Scalar fields map to themselves, "link2.mu" to itself, and the group
    aliases "kappa", "mu" and "omega" to the same field on all three links.
    """
    if path in SCALAR_FIELDS:
        return [path]
    if path in LINK_FIELDS:
        return [f"{link}.{path}" for link in LINKS]
    link, _, field = path.partition(".")
    if link in LINKS and field in LINK_FIELDS:
        return [path]
    raise DomainError(f"unknown SystemParams parameter: {path!r}")


def with_overrides(sys: SystemParams, overrides: Mapping[str, Any]) -> SystemParams:
    """Returns a re-validated copy of sys with the given parameter paths replaced."""
    data = sys.model_dump()
    for path, value in overrides.items():
        for target in expand_path(path):
            link, _, field = target.partition(".")
            if field:
                data[link][field] = value
            else:
                data[link] = value
    try:
        return SystemParams.model_validate(data)
    except ValidationError as exc:
        raise DomainError(f"invalid overrides {dict(overrides)}: {exc}") from exc


def _nonnegative(value: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return arr


def _unwrap(result: np.ndarray) -> float | np.ndarray:
    if np.ndim(result) == 0:
        return float(result)
    return result


def relay_power(sys: SystemParams, h1_sq: ArrayLike) -> float | np.ndarray:
    """Harvested relay power eta alpha Ps h1^2 / ((1 - alpha) d1^xi1)."""
    h1 = _nonnegative(h1_sq, "h1_sq")
    return _unwrap(sys.zeta * sys.ps * h1 / sys.d1**sys.xi1)


def snr_relay(sys: SystemParams, h3_sq: ArrayLike) -> float | np.ndarray:
    """Interference-limited relay SNR 1 / (zeta h3^2); inf where h3^2 = 0."""
    h3 = _nonnegative(h3_sq, "h3_sq")
    out = np.full(h3.shape, np.inf)
    pos = h3 > 0
    out[pos] = 1.0 / (sys.zeta * h3[pos])
    return _unwrap(out)


def snr_dest(sys: SystemParams, h1_sq: ArrayLike, h2_sq: ArrayLike) -> float | np.ndarray:
    h1 = _nonnegative(h1_sq, "h1_sq")
    h2 = _nonnegative(h2_sq, "h2_sq")
    return _unwrap(sys.a * h1 * h2)


def capacity(sys: SystemParams, snr: ArrayLike) -> float | np.ndarray:
    """(1 - alpha) log2(1 + snr) in bits/s/Hz."""
    gamma = _nonnegative(snr, "snr")
    return _unwrap((1.0 - sys.alpha) * np.log1p(gamma) / math.log(2.0))


class MonteCarloReport(BaseModel):
    """A Monte Carlo outage estimate."""

    model_config = ConfigDict(frozen=True)

    estimate: float = Field(ge=0.0, le=1.0)
    stderr: float = Field(ge=0.0)
    trials: int = Field(ge=1)
    seed: int
    workers: int = Field(default=1, ge=1)

    def z_score(self, value: float) -> float:
        """Deviation of value from the estimate in standard errors."""
        spread = max(self.stderr, 1.0 / self.trials)
        return abs(value - self.estimate) / spread

    def agrees(self, value: float, sigmas: float = 3.0) -> bool:
        # an estimate of exactly 0 or 1 has zero stderr; floor it at one trial
        return self.z_score(value) <= sigmas


def _count_outages(sys: SystemParams, trials: int, seed_seq: np.random.SeedSequence, chunk: int) -> int:
    rng = np.random.default_rng(seed_seq)
    outages = 0
    remaining = trials
    while remaining > 0:
        n = min(chunk, remaining)
        h1 = fading.sample(sys.link1, rng, n)
        h2 = fading.sample(sys.link2, rng, n)
        h3 = fading.sample(sys.link3, rng, n)
        gamma_min = np.minimum(snr_relay(sys, h3), snr_dest(sys, h1, h2))
        outages += int(np.count_nonzero(capacity(sys, gamma_min) < sys.c_th))
        remaining -= n
    return outages


def mc_outage(
    sys: SystemParams,
    trials: int | None = None,
    seed: int | None = None,
    workers: int | None = None,
    chunk: int = _MC_CHUNK,
) -> MonteCarloReport:
    """Fraction of trials with min(C_r, C_d) < c_th.

    Each worker draws its share from its own SeedSequence(seed).spawn child;
    the counts are merged in worker order, so the estimate depends only on
    (seed, trials, workers).
    """
    trials = trials if trials is not None else get_env_int("KMR_MC_TRIALS", 1_000_000)
    seed = seed if seed is not None else get_env_int("KMR_SEED", 2024)
    workers = workers if workers is not None else get_env_int("KMR_WORKERS", 1)
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    if chunk < 1:
        raise DomainError(f"chunk must be >= 1, got {chunk}")

    shares = [trials // workers + (1 if i < trials % workers else 0) for i in range(workers)]
    children = np.random.SeedSequence(seed).spawn(workers)
    if workers == 1:
        counts = [_count_outages(sys, shares[0], children[0], chunk)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            counts = list(
                executor.map(lambda job: _count_outages(sys, job[0], job[1], chunk), zip(shares, children))
            )

    estimate = sum(counts) / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    logger.info(
        "mc_outage: %d/%d outages (p=%.6g +/- %.2g, seed=%d, workers=%d)",
        sum(counts),
        trials,
        estimate,
        stderr,
        seed,
        workers,
    )
    return MonteCarloReport(estimate=estimate, stderr=stderr, trials=trials, seed=seed, workers=workers)
