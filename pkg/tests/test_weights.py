# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import math
import unittest

import numpy as np
from scipy import integrate

from numlab.hardy import (BallEquator, FlatSlab, ScalarField, Verdict,
                          WeightTriple, attainment_integral, normalize_p,
                          validate_weights)
from numlab.hardy.errors import WeightError, WeightHypothesisError


def ball_weights(q: str) -> WeightTriple:
    return WeightTriple.from_strings(q=q, dim=3)


class TestWeightTriple(unittest.TestCase):
    def test_unweighted(self):
        w = WeightTriple.unweighted(3)
        self.assertTrue(w.is_unweighted)
        self.assertTrue(WeightTriple.from_config('unweighted',
                                                 dim=3).is_unweighted)
        self.assertFalse(w.scaled_eta(2.0).is_unweighted)

    def test_from_config_defaults(self):
        w = WeightTriple.from_config({'q': '1 - x1**2'}, dim=3)
        self.assertEqual(w.p.expression, '1')
        self.assertEqual(w.eta, ScalarField('delta**2', dim=3))
        self.assertEqual(w.to_config()['q'], w.q.expression)

    def test_mixed_dimensions(self):
        with self.assertRaises(WeightError):
            WeightTriple(ScalarField(1, dim=3), ScalarField(1, dim=4),
                         ScalarField(1, dim=3))

    def test_evaluate(self):
        s = FlatSlab()
        w = WeightTriple.from_strings(p='2', q='1 + x3', eta='delta**2')
        p, q, eta = w.evaluate(s, np.array([[0.3, 0.4, 0.1]]))
        np.testing.assert_allclose(p, [2.0])
        np.testing.assert_allclose(q, [1.1])
        np.testing.assert_allclose(eta, [0.25])


class TestValidateWeights(unittest.TestCase):
    def test_unweighted_is_valid(self):
        s = FlatSlab(beta=0.1)
        report = validate_weights(WeightTriple.unweighted(3), s, 512)
        self.assertTrue(report.ok)
        self.assertEqual(report.max_q_over_p, 1.0)
        self.assertLess(report.eta_constant, 0.1)
        report.raise_for_violations()

    def test_argmax_on_the_equator(self):
        w = ball_weights('1 - sin(psi)**2/2')
        report = validate_weights(w, BallEquator(), 512)
        self.assertTrue(report.ok, report.conditions)
        argmax = np.sort(report.argmax_sigma[:, 0])
        np.testing.assert_allclose(argmax, [0.0, math.pi], atol=1e-9)

    def test_ratio_above_one(self):
        report = validate_weights(ball_weights('2'), BallEquator(), 256)
        self.assertFalse(report.ok)
        self.assertIn('max q/p = 1', report.conditions)
        with self.assertRaises(WeightHypothesisError) as cm:
            report.raise_for_violations()
        self.assertIs(cm.exception.report, report)

    def test_eta_must_vanish_on_sigma(self):
        w = WeightTriple.from_strings(eta='1', dim=3)
        report = validate_weights(w, FlatSlab(), 256)
        self.assertEqual(report.conditions, ['eta = 0 on Sigma'])

    def test_positivity(self):
        w = WeightTriple.from_strings(p='x1 - 0.5', q='x1 - 0.5', dim=3)
        report = validate_weights(w, FlatSlab(), 256)
        self.assertIn('p > 0', report.conditions)
        self.assertIn('q > 0', report.conditions)
        self.assertEqual(report.to_json()['ok'], False)

    def test_dimension_mismatch(self):
        with self.assertRaises(WeightError):
            validate_weights(WeightTriple.unweighted(4), FlatSlab(), 64)


class TestAttainmentIntegral(unittest.TestCase):
    def test_constant_ratio(self):
        result = attainment_integral(ball_weights('0.75'), BallEquator())
        self.assertIs(result.verdict, Verdict.FINITE)
        self.assertTrue(result.attained)
        self.assertAlmostEqual(result.value, 4.0 * math.pi, delta=1e-8)
        self.assertEqual(result.zeros, ())

    def test_flat_patch_constant_ratio(self):
        w = WeightTriple.from_strings(q='0.36', dim=3)
        result = attainment_integral(w, FlatSlab())
        self.assertAlmostEqual(result.value, 1.0 / 0.8, delta=1e-8)

    def test_touching_everywhere_keeps_a_ladder(self):
        for s in (FlatSlab(), BallEquator()):
            result = attainment_integral(WeightTriple.unweighted(3), s)
            self.assertIs(result.verdict, Verdict.DIVERGENT)
            self.assertEqual(len(result.ladder), 6)
            cutoffs = np.array([r for r, _ in result.ladder])
            partial = np.array([value for _, value in result.ladder])
            np.testing.assert_allclose(
                partial, s.sigma_measure * np.log(1.0 / cutoffs))
            self.assertTrue(np.all(np.diff(partial) > 0.0))

    def test_quadratic_contact_diverges(self):
        result = attainment_integral(ball_weights('1 - sin(psi)**2'),
                                     BallEquator())
        self.assertIs(result.verdict, Verdict.DIVERGENT)
        self.assertFalse(result.attained)
        self.assertEqual(len(result.zeros), 2)
        self.assertAlmostEqual(result.local_exponent, 2.0, delta=0.05)
        self.assertEqual(result.to_json()['value'], 'divergent')

        partial = [value for _, value in result.ladder]
        steps = np.diff(partial)
        self.assertTrue(np.all(steps > 0.0))
        # logarithmic growth: equal increments per decade of the cutoff
        np.testing.assert_allclose(steps[1:], steps[-1], rtol=0.05)

    def test_lifted_contact_is_finite(self):
        def integrand(t):
            return 1.0 / math.sqrt(0.01 + math.sin(t) ** 2)

        reference, _ = integrate.quad(integrand, 0.0, 0.5 * math.pi,
                                      epsabs=1e-13, epsrel=1e-13, limit=400)
        result = attainment_integral(
            ball_weights('1 - (0.01 + sin(psi)**2)'), BallEquator())
        self.assertIs(result.verdict, Verdict.FINITE)
        self.assertAlmostEqual(result.value, 4.0 * reference, delta=1e-6)

    def test_shifted_parametrisation(self):
        plain = attainment_integral(
            ball_weights('1 - (0.01 + sin(psi)**2)'), BallEquator())
        shifted = attainment_integral(
            ball_weights('1 - (0.01 + sin(psi - 0.7)**2)'), BallEquator())
        self.assertIs(shifted.verdict, plain.verdict)
        self.assertAlmostEqual(shifted.value, plain.value, delta=1e-7)

    def test_domination(self):
        small = attainment_integral(ball_weights('0.75'), BallEquator())
        large = attainment_integral(
            ball_weights('1 - 0.2*(0.1 + sin(psi)**2)'), BallEquator())
        self.assertLessEqual(small.value, large.value)

    def test_ratio_above_one_on_sigma(self):
        with self.assertRaises(WeightHypothesisError):
            attainment_integral(ball_weights('1 + sin(psi)**2'),
                                BallEquator())


class TestNormalizeP(unittest.TestCase):
    points = np.array([[0.1, 0.2, 0.3], [0.5, -0.4, 0.0]])

    def test_exponential_weight(self):
        w = WeightTriple.from_strings(p='exp(x1)', q='exp(x1)', dim=3)
        reduced = normalize_p(w)
        np.testing.assert_allclose(reduced.extra_potential(self.points),
                                   [-0.25, -0.25])
        np.testing.assert_allclose(reduced.potential(self.points),
                                   [0.25, 0.25])
        np.testing.assert_allclose(reduced.q_over_p(self.points), [1.0, 1.0])
        self.assertTrue(reduced.triple.p.is_constant)

    def test_square_weight_has_no_potential(self):
        w = WeightTriple.from_strings(p='(1 + x1)**2', dim=3)
        reduced = normalize_p(w)
        self.assertEqual(reduced.extra_potential.sympy_expr, 0)
        np.testing.assert_allclose(reduced.q_over_p(self.points),
                                   1.0 / (1.0 + self.points[:, 0]) ** 2)

    def test_eta_is_divided_by_p(self):
        w = WeightTriple.from_strings(p='2', eta='delta**2', dim=3)
        reduced = normalize_p(w)
        self.assertEqual(reduced.triple.eta,
                         ScalarField('delta**2/2', dim=3))

    def test_unsupported_p(self):
        with self.assertRaises(WeightError):
            normalize_p(WeightTriple.from_strings(p='1 + d', dim=3))
        with self.assertRaises(WeightError):
            normalize_p(WeightTriple.from_strings(p='2 + Abs(x1)', dim=3))
