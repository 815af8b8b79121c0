"""Test cases for the closed-form outage expressions."""

import logging
import math
import os
import sys
import unittest
from unittest import mock

import numpy as np
import pytest
from scipy import integrate, special

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from kappa_mu_relay import analytic, fading
from kappa_mu_relay.analytic import OutageMethod
from kappa_mu_relay.errors import DomainError
from kappa_mu_relay.experiments import sweep, validate
from kappa_mu_relay.experiments.sweep import SweepSpec
from kappa_mu_relay.fading import KappaMuParams
from kappa_mu_relay.mathkern import SeriesPolicy
from kappa_mu_relay.sysmodel import SystemParams

logger = logging.getLogger(__name__)


def _link(kappa: float, mu: float) -> KappaMuParams:
    return KappaMuParams(kappa=kappa, mu=mu)


def _interior(**overrides) -> SystemParams:
    """a = 100, b = 1: outage well inside (0, 1)."""
    fields = {"alpha": 0.5, "eta": 1.0, "ps": 1.0, "d1": 1.0, "d2": 1.0}
    fields.update(overrides)
    return SystemParams(**fields)


def _all_links(kappa: float, mu: float) -> dict[str, KappaMuParams]:
    return {name: _link(kappa, mu) for name in ("link1", "link2", "link3")}


def _rice_as_printed(
    k1: float, k2: float, k3: float, b: float, upsilon: float, a: float, c_th: float, terms: int = 20
) -> float:
    """Rice outage in its expanded double-sum form, transcribed term by term."""
    # gamma(q + 1, x) in the printed form is the unregularized lower incomplete gamma
    loop = sum(
        k3**q
        / (math.gamma(q + 1) * math.factorial(q))
        * special.gammainc(q + 1, (1 + k3) * b / upsilon)
        * math.gamma(q + 1)
        for q in range(terms)
    )
    loop *= math.exp(-k3)
    double = sum(k1**n * k2**m / (math.factorial(n) * math.factorial(m)) for n in range(terms) for m in range(terms))
    bessel = 0.0
    argument = 2.0 * math.sqrt((1 + k1) * (1 + k2) * c_th / a)
    for n in range(terms):
        for l in range(terms):
            for k in range(n + 1):
                bessel += (
                    k1**n
                    * k2**l
                    / (math.factorial(n) * math.factorial(l) * math.factorial(k) * math.factorial(l))
                    * ((k1 + 1) * (k1 + 1) * upsilon / a) ** ((l + k + 1) / 2)
                    * special.kv(k - l - 1, argument)
                )
    return 1.0 - loop * (1.0 - math.exp(-(k1 + k2)) * (double - 2.0 * bessel))


class TestLoopback(unittest.TestCase):
    def test_against_quadrature(self):
        sys = _interior(link3=_link(2.0, 1.5))
        self.assertEqual(sys.b, 1.0)
        estimate = analytic.cdf_loopback(sys, 0.5)
        expected, _ = integrate.quad(lambda z: fading.pdf(sys.link3, z), 0.0, 2.0, epsrel=1e-12)
        self.assertTrue(estimate.converged)
        self.assertAlmostEqual(estimate.value, expected, delta=1e-8)

    def test_decreasing_in_threshold(self):
        sys = _interior(link3=_link(1.0, 2.0))
        values = [analytic.cdf_loopback(sys, u).value for u in (0.1, 0.5, 1.0, 3.0, 10.0)]
        self.assertTrue(all(x >= y for x, y in zip(values, values[1:])))

    def test_rejects_nonpositive_threshold(self):
        with self.assertRaises(DomainError):
            analytic.cdf_loopback(_interior(), 0.0)


class TestProduct(unittest.TestCase):
    """Distribution of the two-hop product W = h1^2 h2^2."""

    def setUp(self):
        self.sys = _interior(ps=0.1, link1=_link(1.0, 2.0), link2=_link(1.0, 1.0))

    def test_gain(self):
        self.assertAlmostEqual(self.sys.a, 10.0, delta=1e-12)

    def test_series_against_quadrature(self):
        series = analytic.cdf_product(self.sys, 1.0)
        quadrature = analytic.cdf_product_quadrature(self.sys, 1.0)
        self.assertTrue(series.converged)
        self.assertGreater(series.value, 0.0)
        self.assertAlmostEqual(series.value, quadrature, delta=1e-7)

    def test_nakagami_hops(self):
        sys = _interior(link1=_link(0.0, 2.0), link2=_link(0.0, 3.0))
        series = analytic.cdf_product(sys, 1.0)
        self.assertEqual(series.terms_used, 1)
        self.assertAlmostEqual(series.value, analytic.cdf_product_quadrature(sys, 1.0), delta=1e-8)

    def test_hops_swap_when_only_second_mu_is_integer(self):
        sys = _interior(link1=_link(1.0, 1.5), link2=_link(2.0, 2.0))
        swapped = sys.model_copy(update={"link1": sys.link2, "link2": sys.link1})
        series = analytic.cdf_product(sys, 0.7)
        self.assertAlmostEqual(series.value, analytic.cdf_product(swapped, 0.7).value, delta=1e-14)
        self.assertAlmostEqual(series.value, analytic.cdf_product_quadrature(sys, 0.7), delta=1e-7)

    def test_quadrature_reads_policy_from_environment(self):
        sys = _interior(ps=0.1, link1=_link(1.0, 1.5), link2=_link(2.0, 2.5))
        adaptive = analytic.cdf_product_quadrature(sys, 1.0, policy=SeriesPolicy())
        explicit = analytic.cdf_product_quadrature(sys, 1.0, policy=SeriesPolicy.fixed(3))
        with mock.patch.dict(os.environ, {"KMR_FIXED_TERMS": "3"}):
            from_env = analytic.cdf_product_quadrature(sys, 1.0)
        self.assertEqual(from_env, explicit)
        self.assertGreater(abs(from_env - adaptive), 1e-6)

    def test_both_non_integer_needs_quadrature(self):
        sys = _interior(link1=_link(1.0, 1.5), link2=_link(2.0, 2.5))
        with self.assertRaises(DomainError):
            analytic.cdf_product(sys, 1.0)
        value = analytic.cdf_product_quadrature(sys, 1.0)
        self.assertGreater(value, 0.0)
        self.assertLess(value, 1.0)

    @pytest.mark.oracle
    def test_against_sampled_pairs(self):
        rng = np.random.default_rng(77)
        trials = 1_000_000
        w = fading.sample(self.sys.link1, rng, trials) * fading.sample(self.sys.link2, rng, trials)
        estimate = np.mean(w <= 1.0 / self.sys.a)
        stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
        self.assertLessEqual(abs(analytic.cdf_product(self.sys, 1.0).value - estimate), 3.0 * stderr)


class TestReductions(unittest.TestCase):
    """Special cases of the unified expression agree with their own forms."""

    def setUp(self):
        rng = np.random.default_rng(5)
        self.grid = [
            _interior(alpha=float(rng.uniform(0.05, 0.9)), ps=float(rng.uniform(0.1, 2.0)))
            for _ in range(20)
        ]
        self.rng = rng

    def test_unified_at_unit_mu_is_rice(self):
        for base in self.grid:
            links = {name: _link(float(self.rng.uniform(0.0, 5.0)), 1.0) for name in ("link1", "link2", "link3")}
            sys = base.model_copy(update=links)
            self.assertAlmostEqual(
                analytic.outage_unified(sys).value, analytic.outage_rice(sys).value, delta=1e-8
            )

    def test_unified_at_zero_kappa_is_nakagami(self):
        for base in self.grid:
            links = {name: _link(0.0, float(self.rng.integers(1, 4))) for name in ("link1", "link2", "link3")}
            sys = base.model_copy(update=links)
            self.assertAlmostEqual(
                analytic.outage_unified(sys).value, analytic.outage_nakagami(sys).value, delta=1e-8
            )

    def test_nakagami_at_unit_m_is_rayleigh(self):
        for sys in self.grid:
            self.assertAlmostEqual(
                analytic.outage_nakagami(sys).value, analytic.outage_rayleigh(sys).value, delta=1e-8
            )

    def test_rice_without_line_of_sight_is_rayleigh(self):
        for sys in self.grid:
            self.assertAlmostEqual(analytic.outage_rice(sys).value, analytic.outage_rayleigh(sys).value, delta=1e-8)

    def test_small_kappa_approaches_nakagami(self):
        sys = _interior(**_all_links(1e-9, 2.0))
        nakagami = analytic.outage_nakagami(_interior(**_all_links(0.0, 2.0)))
        self.assertAlmostEqual(analytic.outage_unified(sys).value, nakagami.value, delta=1e-6)

    def test_interior_values(self):
        result = analytic.outage_rayleigh(_interior())
        self.assertGreater(result.value, 0.03)
        self.assertLess(result.value, 0.15)

    def test_printed_rice_expression(self):
        sys = _interior(link1=_link(1.0, 1.0), link2=_link(2.0, 1.0), link3=_link(3.0, 1.0))
        implemented = analytic.outage_rice(sys).value
        printed = _rice_as_printed(1.0, 2.0, 3.0, sys.b, sys.upsilon, sys.a, sys.c_th)
        logger.info("Rice outage %.10g, printed expression %.10g (difference %.3g)", implemented, printed, printed - implemented)
        self.assertGreaterEqual(implemented, 0.0)
        self.assertLessEqual(implemented, 1.0)


class TestOutage(unittest.TestCase):
    """Properties of the outage probability itself."""

    def test_high_snr_limit(self):
        sys = _interior(c_th=0.5, ps=1e6)
        self.assertAlmostEqual(sys.upsilon, 1.0, delta=1e-15)
        self.assertEqual(sys.b, 1.0)
        self.assertAlmostEqual(analytic.outage_rayleigh_highsnr(sys).value, math.exp(-1.0), delta=1e-14)
        self.assertAlmostEqual(analytic.outage_rayleigh(sys).value, math.exp(-1.0), delta=1e-5)

    def test_nonincreasing_in_source_power(self):
        values = [
            analytic.outage_unified(_interior(ps=ps, **_all_links(1.0, 2.0))).value
            for ps in np.geomspace(0.01, 100.0, 12)
        ]
        self.assertTrue(all(y <= x + 1e-12 for x, y in zip(values, values[1:])), values)
        self.assertLess(values[-1], values[0])

    def test_nondecreasing_in_threshold(self):
        values = [
            analytic.outage_nakagami(_interior(c_th=c, **_all_links(0.0, 2.0))).value
            for c in np.linspace(0.05, 2.0, 10)
        ]
        self.assertTrue(all(y >= x - 1e-12 for x, y in zip(values, values[1:])), values)

    def test_efficiency_trades_harvest_against_loopback(self):
        # higher eta raises the harvested power and the loop-back term together
        etas = np.linspace(0.1, 1.0, 10)
        values = [
            analytic.outage_unified(_interior(eta=float(eta), **_all_links(1.0, 2.0))).value for eta in etas
        ]
        logger.info("outage over eta %s: %s", etas.tolist(), values)
        best = int(np.argmin(values))
        self.assertTrue(0 < best < len(values) - 1, values)
        self.assertGreater(values[0], 2.0 * values[best])
        self.assertGreater(values[-1], 2.0 * values[best])

    def test_policy_from_environment(self):
        sys = _interior(**_all_links(1.0, 2.0))
        with mock.patch.dict(os.environ, {"KMR_FIXED_TERMS": "3"}):
            result = analytic.outage_unified(sys)
        self.assertEqual(result.terms_used, {"q": 3, "n": 3, "l": 3})
        self.assertEqual(result, analytic.outage_unified(sys, SeriesPolicy.fixed(3)))

    def test_raw_values_in_range(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            sys = validate.random_params(rng, _interior())
            result = analytic.outage_unified(sys)
            self.assertGreaterEqual(result.raw_value, -1e-6)
            self.assertLessEqual(result.raw_value, 1.0 + 1e-6)
            self.assertTrue(0.0 <= result.value <= 1.0)
            self.assertTrue(result.converged)

    def test_zero_threshold(self):
        sys = _interior(c_th=0.0)
        for method in OutageMethod:
            self.assertEqual(analytic.evaluate(sys, method).value, 0.0, method)

    def test_overflowing_threshold(self):
        sys = _interior(c_th=1000.0)
        self.assertTrue(math.isinf(sys.upsilon))
        for method in (OutageMethod.UNIFIED, OutageMethod.RICE, OutageMethod.NAKAGAMI, OutageMethod.RAYLEIGH):
            self.assertEqual(analytic.evaluate(sys, method).value, 1.0, method)

    def test_near_unit_alpha(self):
        result = analytic.outage_unified(_interior(alpha=0.999, **_all_links(1.0, 2.0)))
        self.assertAlmostEqual(result.value, 1.0, delta=1e-6)

    def test_both_non_integer_mu(self):
        sys = _interior(link1=_link(1.0, 1.5), link2=_link(2.0, 2.5), link3=_link(0.5, 1.2))
        result = analytic.outage_unified(sys)
        self.assertIn("quadrature", result.terms_used)
        expected = 1.0 - fading.cdf(sys.link3, sys.b / sys.upsilon) * (
            1.0 - analytic.cdf_product_quadrature(sys, sys.upsilon)
        )
        self.assertAlmostEqual(result.value, expected, delta=1e-12)

    def test_fixed_truncation_reports_terms(self):
        result = analytic.outage_unified(_interior(**_all_links(1.0, 2.0)), SeriesPolicy.fixed(20))
        self.assertEqual(result.terms_used, {"q": 20, "n": 20, "l": 20})
        self.assertTrue(result.converged)

    def test_non_convergence_is_flagged(self):
        sys = _interior(**_all_links(5.0, 3.0))
        with self.assertLogs("kappa_mu_relay.analytic", level="WARNING"):
            result = analytic.outage_unified(sys, SeriesPolicy(max_terms_outer=3, max_terms_inner=3))
        self.assertFalse(result.converged)

    def test_unit_mean_power_required(self):
        sys = _interior(link1=KappaMuParams(kappa=1.0, mu=2.0, omega=2.0))
        with self.assertRaises(DomainError):
            analytic.outage_unified(sys)
        self.assertEqual(analytic.applicable_methods(sys), [])

    def test_family_preconditions(self):
        kappa_mu = _interior(**_all_links(1.0, 2.0))
        with self.assertRaises(DomainError):
            analytic.outage_rice(kappa_mu)
        with self.assertRaises(DomainError):
            analytic.outage_nakagami(kappa_mu)
        with self.assertRaises(DomainError):
            analytic.outage_rayleigh(kappa_mu)
        with self.assertRaises(DomainError):
            analytic.outage_nakagami(_interior(**_all_links(0.0, 1.5)))

    def test_applicable_methods(self):
        self.assertEqual(analytic.applicable_methods(_interior()), list(OutageMethod))
        self.assertEqual(
            analytic.applicable_methods(_interior(**_all_links(2.0, 1.0))),
            [OutageMethod.UNIFIED, OutageMethod.RICE],
        )
        self.assertEqual(
            analytic.applicable_methods(_interior(**_all_links(0.0, 2.0))),
            [OutageMethod.UNIFIED, OutageMethod.NAKAGAMI],
        )
        self.assertEqual(analytic.applicable_methods(_interior(**_all_links(0.0, 1.5))), [OutageMethod.UNIFIED])

    def test_evaluate_by_tag(self):
        sys = _interior()
        self.assertEqual(analytic.evaluate(sys, "rayleigh"), analytic.outage_rayleigh(sys))
        self.assertTrue(OutageMethod.RICE.is_series)
        self.assertFalse(OutageMethod.NAKAGAMI.is_series)
        with self.assertRaises(ValueError):
            analytic.evaluate(sys, "awgn")


class TestTruncation(unittest.TestCase):
    """Fixed 20-term truncation on the fading surface, where outage is well below 1."""

    def _spec(self, kappas, mus) -> SweepSpec:
        return SweepSpec(
            name="truncation",
            base={"alpha": 0.06, "ps": 0.5, "sigma_d2": 1e-4},
            axes=[{"label": "kappa", "values": kappas}, {"label": "mu", "values": mus}],
            methods=["unified"],
        )

    def test_surface_is_not_saturated(self):
        rows = sweep.run_sweep(self._spec([0.5, 2.0], [1.0, 2.0]))
        values = [row.outcomes["outage_unified"] for row in rows]
        self.assertTrue(all(0.1 < value < 0.9 for value in values), values)

    def test_twenty_terms_up_to_kappa_mu_four(self):
        # Poisson(4) puts about 1e-8 of its mass beyond the first 20 terms
        spec = self._spec([0.5, 1.0, 2.0], [1.0, 2.0])
        self.assertLess(validate.truncation_gap(spec, 20, 40), 1e-6)
        self.assertLess(validate.truncation_gap(spec, 20, None), 1e-6)

    def test_twenty_terms_drop_the_poisson_tail(self):
        # kappa mu = 15 leaves about 1/8 of each hop's Poisson mass past q = 19
        gap = validate.truncation_gap(self._spec([5.0], [3.0]), 20, 40)
        self.assertGreater(gap, 0.1)
        self.assertLess(validate.truncation_gap(self._spec([5.0], [3.0]), 40, None), 1e-6)

    @pytest.mark.slow
    def test_twenty_terms_with_non_integer_mu(self):
        steps = [0.5, 1.0, 1.5, 2.0]
        self.assertLess(validate.truncation_gap(self._spec(steps, steps), 20, 40), 1e-6)


@pytest.mark.oracle
class TestMonteCarloAgreement(unittest.TestCase):
    """Closed forms against the simulated link at 10^6 trials."""

    def _check(self, sys: SystemParams, seed: int):
        reports = validate.validate_point(sys, trials=1_000_000, seed=seed)
        self.assertTrue(reports)
        for report in reports:
            self.assertTrue(report.within, f"{report.method.value}: z={report.z_score:.2f}")

    def test_kappa_mu(self):
        self._check(_interior(link1=_link(1.0, 2.0), link2=_link(2.0, 1.0), link3=_link(0.5, 3.0)), 1)

    def test_rice(self):
        self._check(_interior(link1=_link(1.0, 1.0), link2=_link(3.0, 1.0), link3=_link(2.0, 1.0)), 2)

    def test_nakagami(self):
        self._check(_interior(link1=_link(0.0, 2.0), link2=_link(0.0, 3.0), link3=_link(0.0, 2.0)), 3)

    def test_rayleigh(self):
        self._check(_interior(), 4)

    def test_non_integer_mu(self):
        self._check(_interior(link1=_link(1.0, 1.5), link2=_link(2.0, 2.5), link3=_link(0.5, 1.2)), 5)

    def test_baseline_surface_point(self):
        self._check(SystemParams(sigma_d2=1e-4, **_all_links(3.0, 3.0)), 6)

    def test_small_grid(self):
        cases = validate.oracle_grid(points=5, seed=11, trials=200_000, base=_interior())
        for case in cases:
            self.assertTrue(case.report.within, f"{case.params}: z={case.report.z_score:.2f}")

    @pytest.mark.slow
    def test_full_grid(self):
        cases = validate.oracle_grid(points=50, seed=2024, trials=1_000_000, base=_interior())
        scores = [case.report.z_score for case in cases]
        # 50 independent 3-sigma checks: one miss is within chance, none beyond 4 sigma
        self.assertLessEqual(sum(score > 3.0 for score in scores), 1, scores)
        self.assertLessEqual(max(scores), 4.0, scores)


if __name__ == "__main__":
    unittest.main()
