"""Closed-form ergodic outage of the full-duplex TSR relay.

With X = h1^2, Y = h2^2, Z = h3^2 the link is up iff Z <= b / upsilon (relay)
and X * Y >= upsilon / a (destination), hence

    P_out = 1 - F_Z(b / upsilon) * Fbar_W(upsilon / a),   W = X * Y.

F_Z is the Poisson-weighted lower incomplete gamma series. Fbar_W is a
double Poisson mixture over the two hops of a finite sum of K-Bessel terms,

    sum_n sum_l w_n v_l sum_{k < mu1 + n} 2 / (k! Gamma(mu2 + l))
        * x^((mu2 + l + k) / 2) * K_{mu2 + l - k}(2 sqrt(x)),   x = phi1 phi2 t,

which needs an integer mu1. W is symmetric in the two hops, so an integer mu2
is enough after swapping them; with neither integer, Fbar_W falls back to a
one-dimensional quadrature. Every expression assumes unit mean power on all
three links.
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Callable

import immutabledict
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import special

from . import fading, mathkern
from .errors import DomainError
from .fading import FadingFamily, FadingKind, KappaMuParams, SeriesEstimate
from .mathkern import Accuracy, SeriesAccumulator, SeriesPolicy
from .sysmodel import SystemParams

__all__ = [
    "OutageMethod",
    "OutageResult",
    "SeriesPolicy",
    "applicable_methods",
    "cdf_loopback",
    "cdf_product",
    "cdf_product_quadrature",
    "evaluate",
    "outage_nakagami",
    "outage_rayleigh",
    "outage_rayleigh_highsnr",
    "outage_rice",
    "outage_unified",
]

logger = logging.getLogger(__name__)

_LOG2 = math.log(2.0)


class OutageMethod(str, Enum):
    UNIFIED = "unified"
    RICE = "rice"
    NAKAGAMI = "nakagami"
    RAYLEIGH = "rayleigh"
    RAYLEIGH_HIGHSNR = "rayleigh_highsnr"

    @property
    def is_series(self) -> bool:
        """True for methods whose value comes from truncated infinite series."""
        return self in (OutageMethod.UNIFIED, OutageMethod.RICE)


class OutageResult(BaseModel):
    """An outage probability with its truncation diagnostics."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0, le=1.0, description="Outage probability clamped to [0, 1].")
    raw_value: float = Field(description="Pre-clamp value.")
    method: OutageMethod
    terms_used: dict[str, int] = Field(default_factory=dict)
    converged: bool = True


def _is_integer(value: float) -> bool:
    return float(value).is_integer()


def _require_unit_omega(sys: SystemParams) -> None:
    for name, link in zip(("link1", "link2", "link3"), sys.links):
        if link.omega != 1.0:
            raise DomainError(
                f"closed-form outage needs unit mean power, got {name}.omega={link.omega}"
            )


def _result(raw: float, method: OutageMethod, terms_used: dict[str, int], converged: bool) -> OutageResult:
    value = min(max(raw, 0.0), 1.0)
    if not converged:
        logger.warning("%s outage did not converge (terms %s)", method.value, terms_used)
    return OutageResult(
        value=value, raw_value=raw, method=method, terms_used=terms_used, converged=converged
    )


def _degenerate(sys: SystemParams, method: OutageMethod) -> OutageResult | None:
    """Outage for c_th = 0 and for an overflowing threshold; None otherwise."""
    if sys.c_th == 0:
        return _result(0.0, method, {}, True)
    if math.isinf(sys.upsilon):
        return _result(1.0, method, {}, True)
    return None


def cdf_loopback(sys: SystemParams, upsilon: float, policy: SeriesPolicy | None = None) -> SeriesEstimate:
    """F_Z(b / upsilon) of the loop-back link; decreasing in upsilon."""
    if not upsilon > 0:
        raise DomainError(f"upsilon must be > 0, got {upsilon}")
    return fading.cdf_series(sys.link3, sys.b / upsilon, policy)


def _k_sum(n_terms: int, shape2: float, log_x: float, two_sqrt_x: float) -> float:
    """sum_{k < n_terms} 2 / (k! Gamma(shape2)) x^((shape2 + k) / 2) K_{shape2 - k}(2 sqrt x)."""
    k = np.arange(n_terms, dtype=float)
    log_terms = (
        _LOG2
        - mathkern.log_gamma(k + 1.0)
        - mathkern.log_gamma(shape2)
        + 0.5 * (shape2 + k) * log_x
        + mathkern.log_bessel_k(shape2 - k, two_sqrt_x)
    )
    return float(np.exp(special.logsumexp(log_terms)))


def _ordered_for_series(p1: KappaMuParams, p2: KappaMuParams) -> tuple[KappaMuParams, KappaMuParams]:
    if _is_integer(p1.mu):
        return p1, p2
    if _is_integer(p2.mu):
        logger.debug("swapping hops: mu1=%s is not an integer, mu2=%s is", p1.mu, p2.mu)
        return p2, p1
    raise DomainError(
        f"the product series needs an integer mu on one hop, got mu1={p1.mu}, mu2={p2.mu}"
    )


def _product_ccdf_series(
    p1: KappaMuParams, p2: KappaMuParams, t: float, policy: SeriesPolicy
) -> tuple[float, dict[str, int], bool]:
    """Pr[X Y > t] as the double Poisson mixture of finite K-Bessel sums."""
    p1, p2 = _ordered_for_series(p1, p2)
    if t == 0:
        return 1.0, {"n": 0, "l": 0}, True
    if math.isinf(t):
        return 0.0, {"n": 0, "l": 0}, True

    x = p1.phi * p2.phi * t
    log_x = math.log(x)
    two_sqrt_x = 2.0 * math.sqrt(x)
    mu1 = int(p1.mu)
    lam1, lam2 = p1.poisson_mean, p2.poisson_mean

    def inner(n: int) -> tuple[float, int, bool]:
        if lam2 == 0:
            return _k_sum(mu1 + n, p2.mu, log_x, two_sqrt_x), 1, True
        acc = SeriesAccumulator(policy, policy.max_terms_inner, mathkern.poisson_mode(lam2) + 1)
        l = 0
        while True:
            weight = math.exp(mathkern.log_poisson_weight(l, lam2))
            term = weight * _k_sum(mu1 + n, p2.mu + l, log_x, two_sqrt_x) if weight > 0 else 0.0
            if acc.add(term):
                break
            l += 1
        return float(acc.total), acc.terms, acc.converged

    if lam1 == 0:
        value, l_terms, converged = inner(0)
        return value, {"n": 1, "l": l_terms}, converged

    outer = SeriesAccumulator(policy, policy.max_terms_outer, mathkern.poisson_mode(lam1) + 1)
    inner_converged = True
    max_l = 0
    n = 0
    while True:
        weight = math.exp(mathkern.log_poisson_weight(n, lam1))
        term = 0.0
        if weight > 0:
            partial, l_terms, ok = inner(n)
            term = weight * partial
            inner_converged = inner_converged and ok
            max_l = max(max_l, l_terms)
        if outer.add(term):
            break
        n += 1
    logger.debug("product series: %d outer, %d inner terms", outer.terms, max_l)
    return float(outer.total), {"n": outer.terms, "l": max_l}, outer.converged and inner_converged


def cdf_product(sys: SystemParams, upsilon: float, policy: SeriesPolicy | None = None) -> SeriesEstimate:
    """F_W at upsilon / a, W = h1^2 h2^2, through the product series.

    Raises DomainError when neither hop has an integer mu; use
    cdf_product_quadrature for that case.
    """
    if not upsilon > 0:
        raise DomainError(f"upsilon must be > 0, got {upsilon}")
    policy = policy or SeriesPolicy.from_env()
    ccdf, terms, converged = _product_ccdf_series(sys.link1, sys.link2, upsilon / sys.a, policy)
    return SeriesEstimate(1.0 - ccdf, terms["n"], converged)


def _product_ccdf_quadrature(
    p1: KappaMuParams, p2: KappaMuParams, t: float, accuracy: Accuracy, policy: SeriesPolicy
) -> float:
    if t == 0:
        return 1.0
    if math.isinf(t):
        return 0.0

    def integrand(u: float) -> float:
        if u <= 0:
            return 0.0
        tail = fading.ccdf_series(p1, t / u, policy).value
        return float(tail) * float(fading.pdf(p2, u))

    # the density of Y may be singular at 0 and has its bulk near 1
    near = mathkern.integrate(integrand, 0.0, 1.0, accuracy)
    far = mathkern.integrate(integrand, 1.0, math.inf, accuracy)
    return near + far


def cdf_product_quadrature(
    sys: SystemParams,
    upsilon: float,
    accuracy: Accuracy | None = None,
    policy: SeriesPolicy | None = None,
) -> float:
    """F_W at upsilon / a by integrating Fbar_X(t / u) f_Y(u) over u."""
    if not upsilon > 0:
        raise DomainError(f"upsilon must be > 0, got {upsilon}")
    accuracy = accuracy or Accuracy()
    policy = policy or SeriesPolicy.from_env()
    ccdf = _product_ccdf_quadrature(sys.link1, sys.link2, upsilon / sys.a, accuracy, policy)
    return min(max(1.0 - ccdf, 0.0), 1.0)


def _series_outage(sys: SystemParams, policy: SeriesPolicy, method: OutageMethod) -> OutageResult:
    _require_unit_omega(sys)
    degenerate = _degenerate(sys, method)
    if degenerate is not None:
        return degenerate

    upsilon = sys.upsilon
    f_z = cdf_loopback(sys, upsilon, policy)
    t = upsilon / sys.a
    if _is_integer(sys.link1.mu) or _is_integer(sys.link2.mu):
        fbar_w, terms, converged = _product_ccdf_series(sys.link1, sys.link2, t, policy)
    else:
        logger.info(
            "mu1=%s and mu2=%s are both non-integer; integrating the product tail",
            sys.link1.mu,
            sys.link2.mu,
        )
        fbar_w = _product_ccdf_quadrature(sys.link1, sys.link2, t, Accuracy(), policy)
        terms, converged = {"quadrature": 2}, True

    raw = 1.0 - float(f_z.value) * fbar_w
    return _result(raw, method, {"q": f_z.terms_used, **terms}, converged and f_z.converged)


def outage_unified(sys: SystemParams, policy: SeriesPolicy | None = None) -> OutageResult:
    """Outage for arbitrary kappa-mu links with unit mean power."""
    return _series_outage(sys, policy or SeriesPolicy.from_env(), OutageMethod.UNIFIED)


def outage_rice(sys: SystemParams, policy: SeriesPolicy | None = None) -> OutageResult:
    """Rice links: the unified series at mu = 1 on every hop."""
    if any(link.mu != 1 for link in sys.links):
        raise DomainError(f"Rice outage needs mu = 1 on every link, got {[l.mu for l in sys.links]}")
    return _series_outage(sys, policy or SeriesPolicy.from_env(), OutageMethod.RICE)


def outage_nakagami(sys: SystemParams, policy: SeriesPolicy | None = None) -> OutageResult:
    """Nakagami-m links: a finite sum, no truncation.

    policy is accepted for a uniform call signature and ignored.
    """
    del policy
    _require_unit_omega(sys)
    if any(link.kappa != 0 for link in sys.links):
        raise DomainError(
            f"Nakagami outage needs kappa = 0 on every link, got {[l.kappa for l in sys.links]}"
        )
    p1, p2 = _ordered_for_series(sys.link1, sys.link2)
    degenerate = _degenerate(sys, OutageMethod.NAKAGAMI)
    if degenerate is not None:
        return degenerate

    upsilon = sys.upsilon
    m1, m2, m3 = int(p1.mu), p2.mu, sys.link3.mu
    f_z = float(mathkern.gamma_lower_reg(m3, m3 * sys.b / upsilon))
    x = m1 * m2 * upsilon / sys.a
    fbar_w = _k_sum(m1, m2, math.log(x), 2.0 * math.sqrt(x))
    return _result(1.0 - f_z * fbar_w, OutageMethod.NAKAGAMI, {"k": m1}, True)


def _require_rayleigh(sys: SystemParams) -> None:
    _require_unit_omega(sys)
    if any(link.kappa != 0 or link.mu != 1 for link in sys.links):
        raise DomainError("Rayleigh outage needs kappa = 0 and mu = 1 on every link")


def outage_rayleigh(sys: SystemParams) -> OutageResult:
    """1 - 2 sqrt(upsilon / a) (1 - exp(-b / upsilon)) K_1(2 sqrt(upsilon / a))."""
    _require_rayleigh(sys)
    degenerate = _degenerate(sys, OutageMethod.RAYLEIGH)
    if degenerate is not None:
        return degenerate

    upsilon = sys.upsilon
    y = 2.0 * math.sqrt(upsilon / sys.a)
    fbar_w = y * float(mathkern.bessel_k(1.0, y))
    f_z = -math.expm1(-sys.b / upsilon)
    return _result(1.0 - f_z * fbar_w, OutageMethod.RAYLEIGH, {}, True)


def outage_rayleigh_highsnr(sys: SystemParams) -> OutageResult:
    """exp(-b / upsilon), from K_1(z) ~ 1 / z for small z."""
    upsilon = sys.upsilon
    raw = math.exp(-sys.b / upsilon) if upsilon > 0 else 0.0
    return _result(raw, OutageMethod.RAYLEIGH_HIGHSNR, {}, True)


def _with_policy(func: Callable[[SystemParams], OutageResult]):
    def call(sys: SystemParams, policy: SeriesPolicy | None = None) -> OutageResult:
        del policy
        return func(sys)

    return call


METHODS: immutabledict.immutabledict[OutageMethod, Callable[..., OutageResult]] = immutabledict.immutabledict(
    {
        OutageMethod.UNIFIED: outage_unified,
        OutageMethod.RICE: outage_rice,
        OutageMethod.NAKAGAMI: outage_nakagami,
        OutageMethod.RAYLEIGH: _with_policy(outage_rayleigh),
        OutageMethod.RAYLEIGH_HIGHSNR: _with_policy(outage_rayleigh_highsnr),
    }
)


def evaluate(
    sys: SystemParams, method: OutageMethod | str, policy: SeriesPolicy | None = None
) -> OutageResult:
    """Runs one outage method by tag."""
    return METHODS[OutageMethod(method)](sys, policy)


def applicable_methods(sys: SystemParams) -> list[OutageMethod]:
    """The methods whose preconditions sys satisfies, most general first."""
    if any(link.omega != 1.0 for link in sys.links):
        return []
    families = {FadingKind.of(link).family for link in sys.links}
    methods = [OutageMethod.UNIFIED]
    if families <= {FadingFamily.RICE, FadingFamily.RAYLEIGH}:
        methods.append(OutageMethod.RICE)
    if families <= {FadingFamily.NAKAGAMI, FadingFamily.RAYLEIGH} and (
        _is_integer(sys.link1.mu) or _is_integer(sys.link2.mu)
    ):
        methods.append(OutageMethod.NAKAGAMI)
    if families == {FadingFamily.RAYLEIGH}:
        methods.extend([OutageMethod.RAYLEIGH, OutageMethod.RAYLEIGH_HIGHSNR])
    return methods
