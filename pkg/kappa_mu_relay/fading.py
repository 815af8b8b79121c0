"""The kappa-mu fading power distribution.

Z = h^2 follows the kappa-mu law with mean power Omega. Equivalently Z is a
Poisson(kappa * mu) mixture of Gamma(mu + J, rate phi / Omega) variables, with
phi = mu * (1 + kappa); the CDF series and the sampler both use that form.
kappa = 0 is handled by an explicit gamma branch (Nakagami-m, and Rayleigh
when mu = 1) instead of evaluating the general density near zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from . import mathkern
from .errors import DomainError, SeriesConvergenceError
from .mathkern import SeriesAccumulator, SeriesPolicy

logger = logging.getLogger(__name__)


class KappaMuParams(BaseModel):
    """One link's (kappa, mu, Omega) triple."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    kappa: float = Field(default=0.0, ge=0.0, description="Dominant-to-scattered power ratio.")
    mu: float = Field(default=1.0, gt=0.0, description="Number of multipath clusters.")
    omega: float = Field(default=1.0, gt=0.0, description="Mean power E[Z].")

    @property
    def phi(self) -> float:
        return self.mu * (1.0 + self.kappa)

    @property
    def rate(self) -> float:
        """Rate of the gamma components, phi / Omega."""
        return self.phi / self.omega

    @property
    def poisson_mean(self) -> float:
        """Mean of the Poisson mixing variable, kappa * mu."""
        return self.kappa * self.mu

    @property
    def log_upsilon(self) -> float:
        """ln of the density's normalizing constant; undefined at kappa = 0."""
        if self.kappa == 0:
            raise DomainError("the normalizing constant is singular at kappa = 0")
        k, m, w = self.kappa, self.mu, self.omega
        return (
            math.log(m)
            + 0.5 * (m + 1.0) * math.log1p(k)
            - m * k
            - 0.5 * (m - 1.0) * math.log(k)
            - 0.5 * (m + 1.0) * math.log(w)
        )


class FadingFamily(str, Enum):
    KAPPA_MU = "kappa_mu"
    RICE = "rice"
    NAKAGAMI = "nakagami"
    RAYLEIGH = "rayleigh"


class FadingKind(BaseModel):
    """A named fading family and its shape parameters."""

    model_config = ConfigDict(frozen=True)

    family: FadingFamily
    kappa: float = Field(default=0.0, ge=0.0)
    mu: float = Field(default=1.0, gt=0.0)

    @classmethod
    def kappa_mu(cls, kappa: float, mu: float) -> "FadingKind":
        return cls(family=FadingFamily.KAPPA_MU, kappa=kappa, mu=mu)

    @classmethod
    def rice(cls, k_factor: float) -> "FadingKind":
        return cls(family=FadingFamily.RICE, kappa=k_factor, mu=1.0)

    @classmethod
    def nakagami(cls, m: float) -> "FadingKind":
        # the kappa -> 0 limit is exactly kappa = 0 on the gamma branch
        return cls(family=FadingFamily.NAKAGAMI, kappa=0.0, mu=m)

    @classmethod
    def rayleigh(cls) -> "FadingKind":
        return cls(family=FadingFamily.RAYLEIGH, kappa=0.0, mu=1.0)

    @classmethod
    def of(cls, params: KappaMuParams) -> "FadingKind":
        """The most specific family that params belongs to."""
        if params.kappa == 0 and params.mu == 1:
            return cls.rayleigh()
        if params.kappa == 0:
            return cls.nakagami(params.mu)
        if params.mu == 1:
            return cls.rice(params.kappa)
        return cls.kappa_mu(params.kappa, params.mu)

    def params(self, omega: float = 1.0) -> KappaMuParams:
        return KappaMuParams(kappa=self.kappa, mu=self.mu, omega=omega)


@dataclass(frozen=True)
class SeriesEstimate:
    """A truncated series value with its bookkeeping."""

    value: float | np.ndarray
    terms_used: int
    converged: bool


def _power_argument(z: ArrayLike) -> np.ndarray:
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(z_arr)) or np.any(z_arr < 0):
        raise DomainError(f"power argument must be >= 0, got {z!r}")
    return z_arr


def _unwrap(result: np.ndarray) -> float | np.ndarray:
    if np.ndim(result) == 0:
        return float(result)
    return result


def mixture_pdf(
    p: KappaMuParams, z: ArrayLike, policy: SeriesPolicy | None = None
) -> float | np.ndarray:
    """Density as the Poisson-weighted sum of gamma densities."""
    z_arr = _power_argument(z)
    policy = policy or SeriesPolicy.from_env()
    lam = p.poisson_mean
    if lam == 0:
        return _unwrap(stats.gamma.pdf(z_arr, a=p.mu, scale=1.0 / p.rate))

    acc = SeriesAccumulator(policy, policy.max_terms_outer, mathkern.poisson_mode(lam) + 1)
    q = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        while True:
            log_term = mathkern.log_poisson_weight(q, lam) + stats.gamma.logpdf(
                z_arr, a=p.mu + q, scale=1.0 / p.rate
            )
            if acc.add(np.exp(log_term)):
                break
            q += 1
    return _unwrap(np.asarray(acc.total, dtype=float))


def pdf(p: KappaMuParams, z: ArrayLike) -> float | np.ndarray:
    """kappa-mu power density f_Z(z)."""
    z_arr = _power_argument(z)
    if p.kappa == 0:
        return _unwrap(stats.gamma.pdf(z_arr, a=p.mu, scale=1.0 / p.rate))
    if p.mu < 1:
        # I_{mu-1} has a negative order here; the mixture form is the same density
        return mixture_pdf(p, z_arr)

    k, m, w = p.kappa, p.mu, p.omega
    shape = z_arr.shape
    flat = z_arr.ravel()
    out = np.empty_like(flat)
    at_zero = flat == 0
    # z^((mu-1)/2) I_{mu-1}(c sqrt z) -> (c/2)^(mu-1) z^(mu-1) / Gamma(mu) at the origin
    out[at_zero] = p.rate * math.exp(-p.poisson_mean) if m == 1 else 0.0
    pos = ~at_zero
    if np.any(pos):
        zp = flat[pos]
        arg = 2.0 * m * np.sqrt(k * (1.0 + k) * zp / w)
        log_f = (
            p.log_upsilon
            + 0.5 * (m - 1.0) * np.log(zp)
            - p.rate * zp
            + mathkern.log_bessel_i(m - 1.0, arg)
        )
        out[pos] = np.exp(log_f)
    return _unwrap(out.reshape(shape))


def _gamma_mixture_series(
    p: KappaMuParams, z_arr: np.ndarray, policy: SeriesPolicy, upper: bool
) -> SeriesEstimate:
    regularized = mathkern.gamma_upper_reg if upper else mathkern.gamma_lower_reg
    x = p.rate * z_arr
    lam = p.poisson_mean
    if lam == 0:
        return SeriesEstimate(_unwrap(regularized(p.mu, x)), 1, True)

    acc = SeriesAccumulator(policy, policy.max_terms_outer, mathkern.poisson_mode(lam) + 1)
    q = 0
    while True:
        weight = math.exp(mathkern.log_poisson_weight(q, lam))
        if acc.add(weight * regularized(p.mu + q, x)):
            break
        q += 1
    value = np.clip(np.asarray(acc.total, dtype=float), 0.0, 1.0)
    logger.debug(
        "%s series for %s: %d terms, converged=%s",
        "upper" if upper else "lower",
        p,
        acc.terms,
        acc.converged,
    )
    return SeriesEstimate(_unwrap(value), acc.terms, acc.converged)


def cdf_series(
    p: KappaMuParams, z: ArrayLike, policy: SeriesPolicy | None = None
) -> SeriesEstimate:
    """F_Z(z) as the Poisson-weighted series of regularized lower gammas."""
    z_arr = _power_argument(z)
    return _gamma_mixture_series(p, z_arr, policy or SeriesPolicy.from_env(), upper=False)


def ccdf_series(
    p: KappaMuParams, z: ArrayLike, policy: SeriesPolicy | None = None
) -> SeriesEstimate:
    """1 - F_Z(z); switches to the upper-gamma series where F_Z > 1/2."""
    z_arr = _power_argument(z)
    policy = policy or SeriesPolicy.from_env()
    lower = _gamma_mixture_series(p, z_arr, policy, upper=False)
    lower_value = np.asarray(lower.value, dtype=float)
    if not np.any(lower_value > 0.5):
        return SeriesEstimate(_unwrap(1.0 - lower_value), lower.terms_used, lower.converged)

    upper = _gamma_mixture_series(p, z_arr, policy, upper=True)
    value = np.where(lower_value > 0.5, upper.value, 1.0 - lower_value)
    value = np.where(z_arr == 0, 1.0, value)
    return SeriesEstimate(
        _unwrap(value),
        max(lower.terms_used, upper.terms_used),
        lower.converged and upper.converged,
    )


def _require_converged(estimate: SeriesEstimate, what: str, p: KappaMuParams) -> float | np.ndarray:
    if not estimate.converged:
        raise SeriesConvergenceError(
            f"{what} series for {p} did not converge in {estimate.terms_used} terms",
            terms_used=estimate.terms_used,
            last_value=float(np.max(estimate.value)),
        )
    return estimate.value


def cdf(p: KappaMuParams, z: ArrayLike, policy: SeriesPolicy | None = None) -> float | np.ndarray:
    """kappa-mu power CDF; raises SeriesConvergenceError on non-convergence."""
    return _require_converged(cdf_series(p, z, policy), "cdf", p)


def ccdf(p: KappaMuParams, z: ArrayLike, policy: SeriesPolicy | None = None) -> float | np.ndarray:
    """kappa-mu power CCDF; raises SeriesConvergenceError on non-convergence."""
    return _require_converged(ccdf_series(p, z, policy), "ccdf", p)


def sample(
    p: KappaMuParams,
    rng: np.random.Generator | int | None,
    size: int | tuple[int, ...] | None = None,
) -> float | np.ndarray:
    """Exact draws of Z: J ~ Poisson(kappa mu), G ~ Gamma(mu + J, 1), Z = G Omega / phi."""
    rng = np.random.default_rng(rng)
    lam = p.poisson_mean
    shape = p.mu + rng.poisson(lam, size) if lam > 0 else np.full(size or (), p.mu)
    draws = rng.gamma(shape, 1.0, size) / p.rate
    return _unwrap(np.asarray(draws, dtype=float))
