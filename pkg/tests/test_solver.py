# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import math
import unittest

import numpy as np
from scipy import sparse

from numlab.hardy import (BallEquator, DiscreteProblem, FlatSlab,
                          WeightTriple, find_threshold, local_hardy_check,
                          min_rayleigh, mu_curve)
from numlab.hardy.errors import (ConvergenceError, SolverError,
                                 WeightHypothesisError)
from numlab.hardy.solver import (DENSE_LIMIT, MuResult, pcg,
                                 plateau_tolerance, spectrum_floor)

from . import testutils


class TestPcg(unittest.TestCase):
    def test_spd_system(self):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((12, 12))
        S = sparse.csr_matrix(M @ M.T + 12.0 * np.eye(12))
        b = rng.standard_normal(12)
        result = pcg(S, b, tol=1e-12)
        self.assertTrue(result.converged)
        self.assertIsNone(result.negative_curvature)
        np.testing.assert_allclose(S @ result.x, b, atol=1e-9)

    def test_negative_curvature(self):
        S = sparse.diags([1.0, 2.0, -3.0], format='csr')
        result = pcg(S, np.ones(3))
        self.assertFalse(result.converged)
        self.assertIsNotNone(result.negative_curvature)

    def test_nonpositive_diagonal(self):
        S = sparse.csr_matrix(np.array([[1.0, 0.5], [0.5, 0.0]]))
        result = pcg(S, np.ones(2))
        np.testing.assert_array_equal(result.negative_curvature, [0.0, 1.0])


class TestMinRayleigh(unittest.TestCase):
    def setUp(self):
        self.n = 32
        self.A, self.B = testutils.dirichlet_laplacian_1d(self.n)
        h = 1.0 / self.n
        self.exact = (2.0 / h * math.sin(math.pi * h / 2.0)) ** 2

    def test_discrete_eigenvalue(self):
        result = min_rayleigh(self.A, self.B, self.B, 0.0, tol=1e-10)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.mu, self.exact, places=8)
        self.assertLessEqual(result.residual, 1e-10)

    def test_matches_dense_solver(self):
        from scipy import linalg
        result = min_rayleigh(self.A, self.B, self.B, 0.0, tol=1e-10)
        values = linalg.eigh(self.A.matrix.toarray(), self.B.matrix.toarray(),
                             eigvals_only=True)
        self.assertAlmostEqual(result.mu, values[0], places=8)

    def test_shift_by_lambda(self):
        result = min_rayleigh(self.A, self.B, self.B, 2.0, tol=1e-10)
        self.assertAlmostEqual(result.mu, self.exact - 2.0, places=8)

    def test_eigenvector(self):
        result = min_rayleigh(self.A, self.B, self.B, 0.0, tol=1e-10)
        u = result.eigvec
        self.assertAlmostEqual(self.B.quadratic(u), 1.0)
        x = np.arange(1, self.n) / self.n
        expected = np.sin(math.pi * x)
        cosine = abs(np.dot(u, expected)) / (np.linalg.norm(u)
                                            * np.linalg.norm(expected))
        self.assertAlmostEqual(cosine, 1.0, places=8)

    def test_rejects_bad_tolerance(self):
        with self.assertRaises(SolverError):
            min_rayleigh(self.A, self.B, self.B, 0.0, tol=0.0)

    def test_unconverged(self):
        result = min_rayleigh(self.A, self.B, self.B, 0.0, tol=1e-30)
        self.assertFalse(result.converged)
        self.assertAlmostEqual(result.mu, self.exact, places=8)

    def test_shift_lies_below_the_spectrum(self):
        result = min_rayleigh(self.A, self.B, self.B, 3.0, tol=1e-10)
        self.assertLess(result.shift, result.mu)
        floor = spectrum_floor(_pencil_of(self.A, self.B, 3.0),
                               self.B.matrix)
        self.assertLessEqual(floor, result.mu)

    def test_rejects_consistent_mass(self):
        B = testutils.operator(self.B.matrix + sparse.eye(self.n - 1, k=1)
                               + sparse.eye(self.n - 1, k=-1))
        with self.assertRaises(SolverError):
            min_rayleigh(self.A, B, self.B, 0.0)

    def test_result_rows(self):
        result = min_rayleigh(self.A, self.B, self.B, 0.5, quantity='nu')
        row = result.to_row()
        self.assertEqual(set(row), {'lambda', 'nu', 'residual',
                                    'iterations'})
        data = result.to_json()
        self.assertEqual(data['quantity'], 'nu')
        self.assertEqual(data['grid'], 'test')


def _pencil_of(A, B, lam):
    return sparse.csr_matrix(A.matrix - lam * B.matrix)


class TestSparseEigensolver(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        # 15³ unknowns are above the dense limit
        cls.problem = DiscreteProblem.build(FlatSlab(),
                                            WeightTriple.unweighted(3), 16)

    def test_matches_dense_solver(self):
        from scipy import linalg
        p = self.problem
        self.assertGreater(p.A.dim, DENSE_LIMIT)
        result = p.solve(1.0, tol=1e-9)
        self.assertTrue(result.converged)
        self.assertGreater(result.iterations, 1)
        K = _pencil_of(p.A, p.B_eta, 1.0).toarray()
        values = linalg.eigh(K, p.B_q.matrix.toarray(), eigvals_only=True,
                             subset_by_index=[0, 0])
        self.assertAlmostEqual(result.mu, float(values[0]),
                               delta=1e-7 * max(1.0, abs(values[0])))
        self.assertAlmostEqual(p.B_q.quadratic(result.eigvec), 1.0)
        self.assertGreater(float(np.sum(result.eigvec)), 0.0)

    def test_warm_start_agrees(self):
        p = self.problem
        cold = p.solve(0.0)
        warm = p.solve(0.0, start=p.solve(0.5).eigvec)
        self.assertTrue(warm.converged)
        self.assertAlmostEqual(cold.mu, warm.mu, places=7)


class TestDiscreteProblem(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.s = FlatSlab()
        cls.w = WeightTriple.unweighted(3)
        cls.problem = DiscreteProblem.build(cls.s, cls.w, 8)

    def test_solve(self):
        result = self.problem.solve(0.0)
        self.assertTrue(result.converged)
        self.assertGreater(result.mu, 0.0)
        self.assertEqual(result.quantity, 'nu')
        self.assertAlmostEqual(self.problem.quotient(0.0, result.eigvec),
                               result.mu, places=6)
        self.assertEqual(result.signature, self.problem.grid.signature)

    def test_general_weights_report_mu(self):
        w = WeightTriple.from_strings(p='1', q='0.5', eta='delta**2', dim=3)
        problem = DiscreteProblem.build(self.s, w, 8)
        self.assertEqual(problem.quantity, 'mu')
        self.assertEqual(problem.plateau, 1.0)

    def test_eta_rescaling(self):
        doubled = DiscreteProblem(self.s, self.w.scaled_eta(2.0),
                                  self.problem.grid)
        self.assertEqual(doubled.solve(1.0).mu, self.problem.solve(2.0).mu)

    def test_normalized_problem(self):
        w = WeightTriple.from_strings(p='exp(x1)', q='exp(x1)',
                                      eta='delta**2*exp(x1)', dim=3)
        problem = DiscreteProblem.build(self.s, w, 8, normalized=True)
        self.assertIsNotNone(problem.potential)
        self.assertTrue(problem.solve(0.0).converged)

    def test_curve(self):
        curve = mu_curve(self.problem, [-2.0, -1.0, 0.0, 1.0, 2.0])
        self.assertEqual(len(curve), 5)
        self.assertTrue(curve.converged)
        self.assertEqual(curve.monotonicity_violations(), [])
        self.assertEqual(curve.concavity_violations(), [])
        self.assertTrue(np.all(np.diff(curve.values) < 0.0))
        self.assertEqual([r['lambda'] for r in curve.to_rows()],
                         [-2.0, -1.0, 0.0, 1.0, 2.0])

    def test_wide_curve_is_monotone_and_concave(self):
        curve = mu_curve(self.problem, np.linspace(-20.0, 50.0, 8))
        self.assertTrue(curve.converged)
        self.assertEqual(curve.monotonicity_violations(), [])
        self.assertEqual(curve.concavity_violations(), [])
        self.assertTrue(np.all(np.diff(curve.values) <= 0.0))

    @testutils.slow_test
    def test_wide_curve_on_a_fine_grid(self):
        problem = DiscreteProblem.build(self.s, self.w, 32)
        curve = mu_curve(problem, np.linspace(-20.0, 50.0, 15), tol=1e-9)
        self.assertTrue(curve.converged)
        self.assertTrue(np.all(np.diff(curve.values) <= 0.0))
        self.assertEqual(curve.concavity_violations(), [])

    def test_curve_requires_sorted_lambdas(self):
        with self.assertRaises(SolverError):
            mu_curve(self.problem, [1.0, 0.0])


class TestThreshold(unittest.TestCase):
    def test_plateau_tolerance(self):
        def result(mu):
            return MuResult(0.0, mu, np.ones(1), 0.0, 1, True, 'g', 0.0)

        self.assertEqual(plateau_tolerance(result(1.2), result(1.1)),
                         2.0 * abs(1.2 - 1.1))
        self.assertEqual(plateau_tolerance(result(1.0), result(1.0)), 1e-3)

    def test_bracket(self):
        s = FlatSlab()
        w = WeightTriple.unweighted(3)
        problems = (DiscreteProblem.build(s, w, 8),
                    DiscreteProblem.build(s, w, 16))
        result = find_threshold(problems, width_tol=1.0)
        self.assertLess(result.lam_lo, result.lam_hi)
        self.assertLessEqual(result.width, 1.0)
        lo, hi = result.evidence
        level = result.plateau - result.tol_mu
        self.assertGreaterEqual(lo.mu, level)
        self.assertLess(hi.mu, level)
        self.assertEqual(result.quantity, 'nu')
        data = result.to_json()
        self.assertEqual(data['bracket'], [result.lam_lo, result.lam_hi])
        self.assertEqual(len(data['grids']), 2)

    def test_invalid_weights(self):
        s = FlatSlab()
        w = WeightTriple.from_strings(p='1', q='2', eta='delta**2', dim=3)
        problems = (DiscreteProblem.build(s, w, 8),
                    DiscreteProblem.build(s, w, 8))
        with self.assertRaises(WeightHypothesisError):
            find_threshold(problems)

    def test_nonconvergence(self):
        s = FlatSlab()
        w = WeightTriple.unweighted(3)
        problem = DiscreteProblem.build(s, w, 8)
        with self.assertRaises(ConvergenceError):
            find_threshold((problem, problem), tol=1e-30)

    @testutils.slow_test
    def test_plateau_extrapolation(self):
        s = FlatSlab()
        w = WeightTriple.unweighted(3)
        mu = [DiscreteProblem.build(s, w, n).solve(-10.0).mu
              for n in (16, 32, 64)]
        # the graded grids are nested, so refinement can only lower μ
        self.assertGreaterEqual(mu[0], mu[1] - 1e-8 * abs(mu[1]))
        self.assertGreaterEqual(mu[1], mu[2] - 1e-8 * abs(mu[2]))
        extrapolated = 2.0 * mu[2] - mu[1]
        self.assertLess(abs(extrapolated - s.plateau), 0.05 * s.plateau)

    @testutils.slow_test
    def test_acceptance_bracket(self):
        s = FlatSlab()
        w = WeightTriple.unweighted(3)
        problems = (DiscreteProblem.build(s, w, 32),
                    DiscreteProblem.build(s, w, 64))
        result = find_threshold(problems, width_tol=0.5)
        self.assertLessEqual(result.width, 0.5)
        self.assertTrue(all(r.converged for r in result.evidence))

    @testutils.slow_test
    def test_brackets_overlap_across_grids(self):
        s = FlatSlab()
        w = WeightTriple.unweighted(3)
        problems = [DiscreteProblem.build(s, w, n) for n in (16, 32, 64)]
        coarse = find_threshold((problems[0], problems[1]), width_tol=0.5)
        fine = find_threshold((problems[1], problems[2]), width_tol=0.5)
        self.assertLessEqual(max(coarse.lam_lo, fine.lam_lo),
                             min(coarse.lam_hi, fine.lam_hi))


class TestLocalHardy(unittest.TestCase):
    def test_collar_problem(self):
        s = FlatSlab()
        result = local_hardy_check(s, WeightTriple.unweighted(3), beta=0.1,
                                   n=16)
        self.assertTrue(result.converged)
        self.assertTrue(math.isfinite(result.c))
        self.assertGreater(result.c, 0.0)
        self.assertEqual(result.beta, 0.1)
        self.assertEqual(set(result.to_json()),
                         {'c', 'residual', 'converged', 'grid', 'beta'})

    def test_constant_stays_positive_under_refinement(self):
        s = FlatSlab()
        w = WeightTriple.unweighted(3)
        results = [local_hardy_check(s, w, beta=0.1, n=n) for n in (16, 32)]
        for result in results:
            self.assertTrue(result.converged)
            self.assertGreater(result.c, 0.0)
        self.assertNotEqual(results[0].signature, results[1].signature)

    def test_ball_collar(self):
        s = BallEquator()
        result = local_hardy_check(s, WeightTriple.unweighted(3), beta=0.05,
                                   n=32)
        self.assertTrue(result.converged)
        self.assertTrue(math.isfinite(result.c))
        self.assertGreater(result.c, 0.0)
        self.assertGreater(result.eigvec.size, 0)

    @testutils.slow_test
    def test_certified_collar(self):
        s = FlatSlab()
        result = local_hardy_check(s, WeightTriple.unweighted(3), n=32)
        self.assertTrue(result.converged)
        self.assertEqual(result.beta, s.certified_beta)
