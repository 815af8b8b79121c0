"""Special functions behind every outage expression.

The modified Bessel functions and the incomplete gamma functions come from
scipy.special. This module adds domain checks, log-domain companions that stay
finite where exp(kappa * mu) style factors would overflow, and the series
bookkeeping (SeriesPolicy, SeriesAccumulator) shared by the fading and
analytic modules.
"""

from __future__ import annotations

import logging
import math
import warnings
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate as _integrate
from scipy import special

from .errors import DomainError
from .utils.utils import get_env_float, get_env_int

logger = logging.getLogger(__name__)

# Absolute floor handed to scipy's quad next to the relative tolerance.
_QUAD_ABS_TOL = 1e-15


class Accuracy(BaseModel):
    """Tolerance contract for iterative numerics (quadrature, refinements)."""

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-10, gt=0.0, lt=1e-3)
    max_iter: int = Field(default=200, ge=1)


class SeriesPolicy(BaseModel):
    """Truncation control for every infinite series in the library.

    In adaptive mode a sum stops once three consecutive terms are each below
    rel_tol times the running total. Setting fixed_terms truncates every
    infinite sum at exactly that many terms.
    """

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-10, gt=0.0)
    max_terms_outer: int = Field(default=200, ge=1)
    max_terms_inner: int = Field(default=200, ge=1)
    fixed_terms: int | None = Field(default=None, ge=1)

    @classmethod
    def fixed(cls, terms: int = 20) -> "SeriesPolicy":
        """Fixed truncation; 20 terms reproduces the published curves."""
        return cls(fixed_terms=terms)

    @classmethod
    def from_env(cls) -> "SeriesPolicy":
        """Builds the default policy from KMR_* environment variables."""
        max_terms = get_env_int("KMR_SERIES_MAX_TERMS", 200)
        fixed_terms = get_env_int("KMR_FIXED_TERMS", None)
        return cls(
            rel_tol=get_env_float("KMR_SERIES_REL_TOL", 1e-10),
            max_terms_outer=max_terms,
            max_terms_inner=max_terms,
            fixed_terms=fixed_terms,
        )


class SeriesAccumulator:
    """Running sum of a series of nonnegative terms under a SeriesPolicy.

    Terms may be scalars or numpy arrays; for arrays the stop rule must hold
    elementwise. min_terms keeps the rule from firing on the leading terms of
    a Poisson-weighted series, which can underflow to zero before the mode.
    """

    STREAK = 3

    def __init__(self, policy: SeriesPolicy, max_terms: int, min_terms: int = 0):
        self.total: float | np.ndarray = 0.0
        self.terms = 0
        self.converged = False
        self._rel_tol = policy.rel_tol
        self._fixed = policy.fixed_terms is not None
        self._cap = policy.fixed_terms if self._fixed else max_terms
        self._min_terms = min_terms
        self._streak = 0

    def add(self, term: float | np.ndarray) -> bool:
        """Adds one term and returns True once summation should stop."""
        self.total = self.total + term
        self.terms += 1
        if self._fixed:
            self.converged = self.terms >= self._cap
            return self.converged

        small = bool(np.all(np.abs(term) <= self._rel_tol * np.abs(self.total)))
        self._streak = self._streak + 1 if small else 0
        if self.terms >= self._min_terms and self._streak >= self.STREAK:
            self.converged = True
            return True
        return self.terms >= self._cap


def _as_array(value: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return arr


def _unwrap(result: np.ndarray) -> float | np.ndarray:
    if np.ndim(result) == 0:
        return float(result)
    return result


def bessel_i(v: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """Modified Bessel function of the first kind I_v(x), v >= 0, x >= 0."""
    v_arr = _as_array(v, "v")
    x_arr = _as_array(x, "x")
    if np.any(v_arr < 0):
        raise DomainError(f"bessel_i order must be >= 0, got {v!r}")
    if np.any(x_arr < 0):
        raise DomainError(f"bessel_i argument must be >= 0, got {x!r}")
    return _unwrap(special.iv(v_arr, x_arr))


def _debye_terms(nu: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, ...]:
    z = x / nu
    root = np.sqrt(1.0 + z * z)
    t = 1.0 / root
    eta = root + np.log(z / (1.0 + root))
    u1 = (3.0 * t - 5.0 * t**3) / 24.0
    u2 = (81.0 * t**2 - 462.0 * t**4 + 385.0 * t**6) / 1152.0
    return t, eta, u1, u2


def _debye_log_i(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Uniform large-order expansion of I_nu(nu z).
    t, eta, u1, u2 = _debye_terms(nu, x)
    return (
        -0.5 * np.log(2.0 * np.pi * nu)
        + nu * eta
        + 0.5 * np.log(t)
        + np.log1p(u1 / nu + u2 / nu**2)
    )


def _debye_log_k(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    t, eta, u1, u2 = _debye_terms(nu, x)
    return (
        0.5 * np.log(np.pi / (2.0 * nu))
        - nu * eta
        + 0.5 * np.log(t)
        + np.log1p(-u1 / nu + u2 / nu**2)
    )


def log_bessel_i(v: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """ln I_v(x); finite far beyond the overflow point of bessel_i."""
    v_arr = _as_array(v, "v")
    x_arr = _as_array(x, "x")
    if np.any(v_arr < 0):
        raise DomainError(f"log_bessel_i order must be >= 0, got {v!r}")
    if np.any(x_arr < 0):
        raise DomainError(f"log_bessel_i argument must be >= 0, got {x!r}")

    shape = np.broadcast_shapes(v_arr.shape, x_arr.shape)
    nu = np.broadcast_to(v_arr, shape).ravel()
    xs = np.broadcast_to(x_arr, shape).ravel()
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.log(special.ive(nu, xs)) + xs
    bad = ~np.isfinite(out) & (xs > 0) & (nu > 0)
    if np.any(bad):
        out[bad] = _debye_log_i(nu[bad], xs[bad])
    return _unwrap(out.reshape(shape))


def bessel_k(v: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """Modified Bessel function of the second kind K_v(x), x > 0, any real v."""
    v_arr = _as_array(v, "v")
    x_arr = _as_array(x, "x")
    if np.any(x_arr <= 0):
        raise DomainError(f"bessel_k argument must be > 0, got {x!r}")
    return _unwrap(special.kv(np.abs(v_arr), x_arr))


def log_bessel_k(v: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """ln K_v(x); the large-order expansion takes over where kve overflows."""
    v_arr = _as_array(v, "v")
    x_arr = _as_array(x, "x")
    if np.any(x_arr <= 0):
        raise DomainError(f"log_bessel_k argument must be > 0, got {x!r}")

    shape = np.broadcast_shapes(v_arr.shape, x_arr.shape)
    nu = np.abs(np.broadcast_to(v_arr, shape).ravel())
    xs = np.broadcast_to(x_arr, shape).ravel()
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.log(special.kve(nu, xs)) - xs
    bad = ~np.isfinite(out) & (nu > 0)
    if np.any(bad):
        out[bad] = _debye_log_k(nu[bad], xs[bad])
    return _unwrap(out.reshape(shape))


def _check_gamma_args(s: ArrayLike, x: ArrayLike, name: str) -> tuple[np.ndarray, np.ndarray]:
    s_arr = _as_array(s, "s")
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)):
        raise DomainError(f"{name} argument must not be NaN")
    if np.any(s_arr <= 0):
        raise DomainError(f"{name} shape must be > 0, got {s!r}")
    if np.any(x_arr < 0):
        raise DomainError(f"{name} argument must be >= 0, got {x!r}")
    return s_arr, x_arr


def gamma_lower_reg(s: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """Regularized lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s)."""
    s_arr, x_arr = _check_gamma_args(s, x, "gamma_lower_reg")
    return _unwrap(special.gammainc(s_arr, x_arr))


def gamma_upper_reg(s: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x)."""
    s_arr, x_arr = _check_gamma_args(s, x, "gamma_upper_reg")
    return _unwrap(special.gammaincc(s_arr, x_arr))


def gamma_lower(s: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """Lower incomplete gamma function gamma(s, x)."""
    s_arr, x_arr = _check_gamma_args(s, x, "gamma_lower")
    return _unwrap(special.gamma(s_arr) * special.gammainc(s_arr, x_arr))


def gamma_upper(s: ArrayLike, x: ArrayLike) -> float | np.ndarray:
    """Upper incomplete gamma function Gamma(s, x) = Gamma(s) - gamma(s, x)."""
    s_arr, x_arr = _check_gamma_args(s, x, "gamma_upper")
    return _unwrap(special.gamma(s_arr) * special.gammaincc(s_arr, x_arr))


def gamma_upper_int(n: int, x: float) -> float:
    """Gamma(n, x) for integer n >= 1 through the finite exponential sum.

    Gamma(n, x) = (n-1)! exp(-x) sum_{k=0}^{n-1} x^k / k!
    """
    if int(n) != n or n < 1:
        raise DomainError(f"gamma_upper_int needs an integer n >= 1, got {n!r}")
    if x < 0:
        raise DomainError(f"gamma_upper_int argument must be >= 0, got {x!r}")
    k = np.arange(int(n), dtype=float)
    partial = np.sum(np.exp(special.xlogy(k, x) - special.gammaln(k + 1.0)))
    return math.factorial(int(n) - 1) * math.exp(-x) * float(partial)


def log_gamma(s: ArrayLike) -> float | np.ndarray:
    """ln Gamma(s) for s > 0."""
    s_arr = _as_array(s, "s")
    if np.any(s_arr <= 0):
        raise DomainError(f"log_gamma argument must be > 0, got {s!r}")
    return _unwrap(special.gammaln(s_arr))


def log_poisson_weight(n: ArrayLike, lam: float) -> float | np.ndarray:
    """ln of the Poisson(lam) mass at n; lam = 0 puts all mass on n = 0."""
    n_arr = np.asarray(n, dtype=float)
    return _unwrap(special.xlogy(n_arr, lam) - lam - special.gammaln(n_arr + 1.0))


def poisson_mode(lam: float) -> int:
    return int(math.floor(lam))


def integrate(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    accuracy: Accuracy | None = None,
) -> float:
    """Adaptive quadrature of func over [lower, upper] (bounds may be infinite)."""
    accuracy = accuracy or Accuracy(rel_tol=1e-10)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", _integrate.IntegrationWarning)
        value, abserr = _integrate.quad(
            func,
            lower,
            upper,
            epsabs=_QUAD_ABS_TOL,
            epsrel=accuracy.rel_tol,
            limit=accuracy.max_iter,
        )
    for warning in caught:
        logger.warning("quadrature on [%s, %s]: %s", lower, upper, warning.message)
    logger.debug("quadrature on [%s, %s] = %.17g (abserr %.3g)", lower, upper, value, abserr)
    return float(value)
