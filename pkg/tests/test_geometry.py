# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import math
import unittest

import numpy as np

from numlab.hardy import (BallEquator, FlatSlab, ParametricCurveOnSphere,
                          check_distance_expansions, eval_collar_point,
                          fermi_map, ladder_samples, metric_components)
from numlab.hardy.errors import ChartError, CollarError, GeometryError


class TestScenarios(unittest.TestCase):
    def test_flat_slab_limits(self):
        with self.assertRaises(GeometryError):
            FlatSlab(N=2, k=1)
        with self.assertRaises(GeometryError):
            FlatSlab(N=4, k=3)
        with self.assertRaises(GeometryError):
            FlatSlab(beta=0.5)
        with self.assertRaises(GeometryError):
            FlatSlab(beta=0.3)

    def test_flat_collar_is_the_front_component(self):
        s = FlatSlab(beta=0.25)
        rng = np.random.default_rng(7)
        x = rng.uniform(-1.0, 1.0, size=(4000, 3))
        x[:, 0] = rng.uniform(0.0, 1.0, size=4000)
        f = s.fields(x)
        self.assertTrue(np.all(f.delta_tilde <= f.delta + 1e-15))
        inside = s.in_collar(x)
        self.assertGreater(int(inside.sum()), 0)
        np.testing.assert_allclose(f.delta[inside], f.delta_tilde[inside])
        back = np.array([[0.95, 0.0, 0.0]])
        self.assertLess(float(s.fields(back).delta_tilde[0]), 0.25)
        self.assertFalse(s.in_collar(back)[0])

    def test_plateau(self):
        self.assertEqual(FlatSlab(N=3, k=1).plateau, 1.0)
        self.assertEqual(FlatSlab(N=5, k=1).plateau, 4.0)
        self.assertEqual(BallEquator().plateau, 1.0)

    def test_flat_fields(self):
        s = FlatSlab()
        f = s.fields(np.array([[0.03, 0.04, 0.1], [0.03, 0.04, 0.7]]))
        np.testing.assert_allclose(f.d, [0.03, 0.03])
        np.testing.assert_allclose(f.delta_hat, [0.04, math.hypot(0.04, 0.2)])
        np.testing.assert_allclose(f.delta_tilde ** 2,
                                   f.delta_hat ** 2 + f.d ** 2)
        np.testing.assert_allclose(f.sigma[0], [0.0, 0.0, 0.1])
        np.testing.assert_allclose(f.sigma[1], [0.0, 0.0, 0.5])

    def test_ball_fields(self):
        s = BallEquator()
        lat = 0.02
        x = 0.97 * np.array([[math.cos(lat), 0.0, math.sin(lat)]])
        f = s.fields(x)
        np.testing.assert_allclose(f.d, [0.03])
        np.testing.assert_allclose(f.delta_hat, [lat])
        np.testing.assert_allclose(f.delta_tilde, [math.hypot(0.03, lat)])
        np.testing.assert_allclose(f.sigma, [[1.0, 0.0, 0.0]], atol=1e-15)

    def test_ladder_samples_sit_on_their_rungs(self):
        for s in (FlatSlab(N=4, k=1, beta=0.25), BallEquator(beta=0.3)):
            points, labels = s.ladder_samples((0.2, 0.05, 0.01), 8)
            self.assertEqual(points.shape, (24, s.N))
            np.testing.assert_allclose(s.fields(points).delta_tilde, labels,
                                       rtol=1e-10)
            self.assertTrue(np.all(s.contains(points)))

    def test_sample_collar_stays_in_collar(self):
        for s in (FlatSlab(beta=0.1), BallEquator(beta=0.1)):
            points = s.sample_collar(300, seed=3)
            self.assertTrue(np.all(s.in_collar(points)))
            again = s.sample_collar(300, seed=3)
            np.testing.assert_array_equal(points, again)
            other = s.sample_collar(300, seed=4)
            self.assertFalse(np.array_equal(points, other))

    def test_parametric_equator_matches_ball(self):
        curve = ParametricCurveOnSphere(curve=('cos(t)', 'sin(t)', '0'))
        ball = BallEquator()
        self.assertAlmostEqual(curve.sigma_measure, 2.0 * math.pi, places=8)
        points, _ = ball.ladder_samples((0.04, 0.01), 6)
        mine, theirs = curve.fields(points), ball.fields(points)
        np.testing.assert_allclose(mine.delta_tilde, theirs.delta_tilde,
                                   atol=1e-9)
        np.testing.assert_allclose(mine.sigma, theirs.sigma, atol=1e-9)

    def test_parametric_curve_rejects_bad_input(self):
        with self.assertRaisesRegex(GeometryError, 'three components'):
            ParametricCurveOnSphere(curve=('cos(t)', 'sin(t)'))
        with self.assertRaisesRegex(GeometryError, 'only depend on t'):
            ParametricCurveOnSphere(curve=('cos(t)', 'sin(s)', '0'))


class TestCollarPoint(unittest.TestCase):
    def test_eval_collar_point(self):
        s = FlatSlab(beta=0.1)
        point = eval_collar_point(s, [0.03, 0.04, 0.1])
        self.assertAlmostEqual(point.d, 0.03)
        self.assertAlmostEqual(point.delta_hat, 0.04)
        self.assertAlmostEqual(point.delta_tilde, 0.05)
        self.assertAlmostEqual(point.delta, 0.05)
        np.testing.assert_allclose(point.sigma, [0.0, 0.0, 0.1])
        self.assertFalse(point.singular)

    def test_points_of_sigma_are_singular(self):
        point = eval_collar_point(FlatSlab(), [0.0, 0.0, 0.2])
        self.assertTrue(point.singular)
        self.assertEqual(point.delta_tilde, 0.0)

    def test_outside_collar(self):
        with self.assertRaises(CollarError) as cm:
            eval_collar_point(FlatSlab(beta=0.1), [0.3, 0.0, 0.0])
        self.assertAlmostEqual(cm.exception.delta_tilde, 0.3)
        self.assertEqual(cm.exception.beta, 0.1)

    def test_wrong_dimension(self):
        with self.assertRaises(CollarError):
            eval_collar_point(FlatSlab(), [0.01, 0.0])


class TestFermiChart(unittest.TestCase):
    def test_flat_chart(self):
        chart = FlatSlab().chart()
        np.testing.assert_allclose(fermi_map(chart, [0.1, 0.0, 0.05]),
                                   [0.1, 0.0, 0.05])
        report = metric_components(chart, [0.05, 0.01, 0.0])
        np.testing.assert_allclose(report.matrix, np.eye(3), atol=1e-8)

    def test_ball_chart(self):
        chart = BallEquator().chart()
        np.testing.assert_allclose(chart.base_point, [1.0, 0.0, 0.0])
        np.testing.assert_allclose(fermi_map(chart, [0.1, 0.0, 0.0]),
                                   [0.9, 0.0, 0.0])
        report = metric_components(chart, [0.05, 0.0, 0.0])
        self.assertLess(report.g11_residual, 1e-8)
        self.assertLess(report.g1b_residual, 1e-8)

    def test_ball_frame(self):
        chart = BallEquator().chart()
        frame = chart.frame
        basis = np.vstack([frame['inward'], frame['normal'], frame['tangent']])
        np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
        h = 1e-6
        step = (chart.map(np.array([[h, 0.0, 0.0]]))
                - chart.map(np.array([[-h, 0.0, 0.0]])))[0] / (2.0 * h)
        np.testing.assert_allclose(step, frame['inward'], atol=1e-6)

    def test_chart_radius(self):
        chart = FlatSlab().chart()
        with self.assertRaises(ChartError):
            fermi_map(chart, [0.3, 0.0, 0.0])
        with self.assertRaises(ChartError):
            metric_components(chart, [0.2, 0.0, 0.0], h_fd=0.1)

    def test_base_point_off_sigma(self):
        with self.assertRaises(ChartError):
            FlatSlab().chart([0.1, 0.0, 0.0])
        with self.assertRaises(ChartError):
            BallEquator().chart([0.0, 0.0, 1.0])


class TestDistanceExpansions(unittest.TestCase):
    def test_flat_expansions_are_exact(self):
        s = FlatSlab(beta=0.25)
        report = check_distance_expansions(
            s, ladder_samples(s, (0.2, 0.1, 0.05), 8))
        self.assertEqual(len(report), 24)
        self.assertLess(float(np.max(report.column('r1'))), 1e-10)
        self.assertLess(float(np.max(report.column('r2'))), 1e-6)
        r4 = report.column('r4') * report.column('delta_tilde')
        self.assertLess(float(np.max(r4)), 1e-4)

    def test_ball_expansions(self):
        s = BallEquator(beta=0.3)
        rungs = (0.2, 0.1, 0.05, 0.025)
        report = check_distance_expansions(s, ladder_samples(s, rungs))
        self.assertGreater(len(report), 0)
        self.assertLess(float(np.max(report.column('r2'))), 1e-6)
        self.assertLessEqual(float(np.max(report.column('r1'))), 1.0)
        self.assertTrue(math.isfinite(report.constant_ratio('r3', rungs)))

    def test_ball_constant_fits_are_rung_stable(self):
        s = BallEquator(beta=0.3)
        rungs = (0.2, 0.1, 0.05, 0.025)
        report = check_distance_expansions(s, ladder_samples(s, rungs))
        for name in ('r1', 'r4'):
            self.assertLessEqual(report.constant_ratio(name, rungs), 3.0,
                                 name)

    def test_exclusions_carry_reasons(self):
        s = FlatSlab(beta=0.1)
        samples = np.array([[0.02, 0.01, 0.0],
                            [0.3, 0.0, 0.0],
                            [0.0, 0.0, 0.0]])
        report = check_distance_expansions(s, samples)
        self.assertEqual(len(report), 1)
        reasons = sorted(reason for _, reason in report.excluded)
        self.assertEqual(reasons, ['outside collar', 'singular'])
