# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import unittest

import numpy as np
import sympy

from numlab.hardy import FlatSlab, ScalarField
from numlab.hardy.errors import WeightError


class TestScalarField(unittest.TestCase):
    def test_constant(self):
        f = ScalarField(2, dim=3)
        self.assertTrue(f.is_constant)
        np.testing.assert_array_equal(f(np.zeros((4, 3))), np.full(4, 2.0))

    def test_coordinates(self):
        f = ScalarField('x1 + 2*x3', dim=3)
        self.assertEqual(f.variables, ('x1', 'x3'))
        values = f(np.array([[1.0, 5.0, 2.0], [0.5, 0.0, -1.0]]))
        np.testing.assert_allclose(values, [5.0, -1.5])

    def test_distance_variables_need_fields(self):
        s = FlatSlab()
        f = ScalarField('delta**2', dim=3)
        self.assertTrue(f.depends_on_distances)
        points = np.array([[0.3, 0.4, 0.0]])
        with self.assertRaisesRegex(WeightError, 'distance variable'):
            f(points)
        np.testing.assert_allclose(f(points, s.fields(points)), [0.25])

    def test_unknown_variable(self):
        with self.assertRaisesRegex(WeightError, 'unknown variable'):
            ScalarField('x4 + y', dim=3)

    def test_syntax_error(self):
        with self.assertRaisesRegex(WeightError, 'cannot parse'):
            ScalarField('1 +* x1', dim=3)

    def test_derivatives(self):
        f = ScalarField('x1**2 + x2*x3', dim=3)
        grad = f.gradient()
        self.assertEqual(grad[0], ScalarField('2*x1', dim=3))
        self.assertEqual(grad[2], ScalarField('x2', dim=3))
        self.assertEqual(f.laplacian(), ScalarField(2, dim=3))

    def test_no_derivative_of_distances(self):
        f = ScalarField('d*x1', dim=3)
        with self.assertRaisesRegex(WeightError, 'differentiate'):
            f.derivative(0)

    def test_smoothness(self):
        self.assertTrue(ScalarField('exp(x1)', dim=3).is_smooth)
        self.assertFalse(ScalarField('Abs(x1)', dim=3).is_smooth)

    def test_scaled_and_combined(self):
        f = ScalarField('x1', dim=3)
        self.assertEqual(f.scaled(-1.0), ScalarField('-x1', dim=3))
        self.assertEqual(f.scaled(0.5).sympy_expr,
                         sympy.Float(0.5) * sympy.Symbol('x1', real=True))
        g = f.combine(ScalarField('x2', dim=3), lambda a, b: a * b)
        self.assertEqual(g, ScalarField('x1*x2', dim=3))

    def test_unbalanced_parenthesis(self):
        with self.assertRaisesRegex(WeightError, 'cannot parse'):
            ScalarField('foo(', dim=3)
        with self.assertRaisesRegex(WeightError, 'cannot parse'):
            ScalarField('exp(x1', dim=3)

    def test_expression_keeps_source_text(self):
        self.assertEqual(ScalarField('0.75', dim=3).expression, '0.75')
        self.assertEqual(ScalarField(' 1 - x1**2 ', dim=3).expression,
                         '1 - x1**2')
        self.assertEqual(ScalarField(0.5, dim=3).expression, '0.5')
        self.assertEqual(ScalarField(2, dim=3).expression, '2')
        derived = ScalarField('x1**2', dim=3).derivative(0)
        self.assertEqual(derived.expression, '2*x1')
