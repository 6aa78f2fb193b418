# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import contextlib
import io
import math
import unittest

from numlab.hardy import cli

from . import testutils


FLAT = {'kind': 'flat_slab', 'N': 3, 'k': 1}


def run(*argv):
    with contextlib.redirect_stderr(io.StringIO()):
        return cli.main(list(argv))


class TestParser(unittest.TestCase):
    def test_registry(self):
        self.assertEqual(set(cli.get_command_registry()), {
            'solve', 'curve', 'threshold', 'verify-geometry',
            'verify-constructions', 'local-hardy', 'ik', 'certify-beta',
            'report'})

    def test_overrides(self):
        args = cli.build_parser().parse_args(
            ['curve', '--config', 'c.json', '--n', '8', '16',
             '--lambdas', '0:1:3', '-vv'])
        self.assertEqual(args.grid_sizes, [8, 16])
        self.assertEqual(args.lambdas, '0:1:3')
        self.assertEqual(args.verbose, 2)
        self.assertIsNone(args.beta)

    def test_signed_lambda_grid(self):
        argv = cli._join_signed_values(
            ['curve', '--config', 'c.json', '--lambdas', '-10:10:21'])
        self.assertEqual(argv[-1], '--lambdas=-10:10:21')
        args = cli.build_parser().parse_args(argv)
        self.assertEqual(args.lambdas, '-10:10:21')

    def test_exit_codes(self):
        self.assertEqual(int(cli.ExitStatus.OK), 0)
        self.assertEqual(int(cli.ExitStatus.CONFIG), 2)
        self.assertEqual(int(cli.ExitStatus.NONCONVERGENCE), 3)
        self.assertEqual(int(cli.ExitStatus.VIOLATION), 4)


class TestCommands(unittest.TestCase):
    def test_missing_command(self):
        self.assertEqual(run(), 2)

    def test_missing_config(self):
        self.assertEqual(run('ik', '--config', '/nonexistent/c.json'), 2)

    def test_invalid_override(self):
        with testutils.ConfigDirectory(FLAT) as d:
            self.assertEqual(
                run('solve', '--config', str(d.config), '--n', '4'), 2)

    def test_malformed_weight(self):
        with testutils.ConfigDirectory(FLAT, {'q': 'foo('}) as d:
            self.assertEqual(run('ik', '--config', str(d.config)), 2)

    def test_ik(self):
        with testutils.ConfigDirectory({'kind': 'ball_equator'},
                                       {'q': '0.75'}) as d:
            self.assertEqual(run('ik', '--config', str(d.config)), 0)
            data = d.read_json('ik.json')
            self.assertEqual(data['schema'], 1)
            self.assertEqual(data['verdict'], 'finite')
            self.assertAlmostEqual(data['value'], 4.0 * math.pi, places=8)

    def test_solve(self):
        with testutils.ConfigDirectory(FLAT, 'unweighted') as d:
            status = run('solve', '--config', str(d.config), '--n', '8',
                         '--lambdas', '0:0:1')
            self.assertEqual(status, 0)
            data = d.read_json('solve.json')
            self.assertTrue(data['result']['converged'])
            self.assertEqual(data['result']['quantity'], 'nu')
            self.assertEqual(data['plateau'], 1.0)

    def test_curve(self):
        with testutils.ConfigDirectory(FLAT, 'unweighted') as d:
            status = run('curve', '--config', str(d.config), '--n', '8',
                         '--lambdas', '-1:1:3')
            self.assertEqual(status, 0)
            lines = (d.out / 'curve.csv').read_text().splitlines()
            self.assertEqual(lines[0], 'lambda,nu,residual,iterations')
            self.assertEqual(len(lines), 4)
            self.assertTrue(lines[1].startswith('-1'))
            self.assertTrue((d.out / 'curve.gp').exists())
            data = d.read_json('curve.json')
            self.assertEqual(data['monotonicity_violations'], [])

    def test_threshold_needs_two_grids(self):
        with testutils.ConfigDirectory(FLAT, 'unweighted') as d:
            status = run('threshold', '--config', str(d.config), '--n', '8')
            self.assertEqual(status, 2)

    def test_verify_geometry(self):
        with testutils.ConfigDirectory(FLAT) as d:
            self.assertEqual(
                run('verify-geometry', '--config', str(d.config)), 0)
            data = d.read_json('geometry.json')
            self.assertLess(data['r2_max'], 1e-6)
            self.assertTrue((d.out / 'expansions.csv').exists())

    @testutils.slow_test
    def test_report(self):
        with testutils.ConfigDirectory(FLAT, 'unweighted',
                                       {'grid_sizes': [16, 32]}) as d:
            status = run('report', '--config', str(d.config))
            data = d.read_json('report.json')
            self.assertEqual(status, max(data['statuses'].values()))
            self.assertIn('ik', data['artifacts'])
