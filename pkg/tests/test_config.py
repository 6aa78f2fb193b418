# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import json
import math
import pathlib
import tempfile
import unittest

import numpy as np

from numlab.hardy import artifacts
from numlab.hardy.config import ExperimentConfig, RunOptions
from numlab.hardy.errors import ConfigError

from . import testutils


FLAT = {'kind': 'flat_slab', 'N': 3, 'k': 1}


class TestExperimentConfig(unittest.TestCase):
    def test_defaults(self):
        config = ExperimentConfig.from_mapping({'scenario': FLAT})
        self.assertEqual(config.scenario.N, 3)
        self.assertTrue(config.weights.is_unweighted)
        run = config.run
        self.assertEqual(run.grid_sizes, (16, 32))
        self.assertEqual(run.lambdas.size, 21)
        self.assertEqual(run.lambdas[0], -10.0)
        self.assertEqual(run.epsilons, (0.5,))
        self.assertIsNone(run.beta)
        self.assertIsNone(config.command)
        self.assertEqual(config.to_json()['weights'], 'unweighted')

    def test_weights_and_command(self):
        config = ExperimentConfig.from_mapping({
            'scenario': {'kind': 'ball_equator'},
            'weights': {'q': '0.75'},
            'run': {'command': 'ik', 'lambdas': '0:1:2'}})
        self.assertEqual(config.command, 'ik')
        self.assertFalse(config.weights.is_unweighted)
        self.assertEqual(config.to_json()['weights']['q'], '0.75')
        np.testing.assert_array_equal(config.run.lambdas, [0.0, 1.0])

    def test_overrides(self):
        config = ExperimentConfig.from_mapping({'scenario': FLAT})
        changed = config.with_overrides(grid_sizes=[8], seed=None,
                                        lambdas='0:0:1')
        self.assertEqual(changed.run.grid_sizes, (8,))
        self.assertEqual(changed.run.seed, 0)
        np.testing.assert_array_equal(changed.run.lambdas, [0.0])
        self.assertEqual(config.run.grid_sizes, (16, 32))

    def assertConfigError(self, data, field):
        with self.assertRaises(ConfigError) as cm:
            ExperimentConfig.from_mapping(data)
        self.assertEqual(cm.exception.field, field)
        if field is not None:
            self.assertTrue(str(cm.exception).startswith(f'{field}: '))

    def test_field_paths(self):
        self.assertConfigError({'scenario': FLAT, 'extra': 1}, None)
        self.assertConfigError({}, 'scenario')
        self.assertConfigError({'scenario': {'kind': 'torus'}},
                               'scenario.kind')
        self.assertConfigError({'scenario': FLAT, 'weights': {'r': '1'}},
                               'weights')
        self.assertConfigError({'scenario': FLAT, 'weights': {'q': 'foo('}},
                               'weights')
        self.assertConfigError({'scenario': FLAT, 'run': {'speed': 1}},
                               'run')
        self.assertConfigError({'scenario': FLAT, 'run': {'tol': -1.0}},
                               'run.tol')
        self.assertConfigError({'scenario': FLAT,
                                'run': {'grid_sizes': [4]}},
                               'run.grid_sizes')
        self.assertConfigError({'scenario': FLAT,
                                'run': {'epsilons': [1.0]}},
                               'run.epsilons')
        self.assertConfigError({'scenario': FLAT,
                                'run': {'lambdas': '1:2'}},
                               'run.lambdas')
        self.assertConfigError({'scenario': FLAT,
                                'run': {'lambdas': '2:1:3'}},
                               'run.lambdas')

    def test_syntax_error_line(self):
        with self.assertRaises(ConfigError) as cm:
            ExperimentConfig.from_json('{\n  "scenario": ,\n}')
        self.assertEqual(cm.exception.line, 2)

    def test_load(self):
        with testutils.ConfigDirectory(FLAT, 'unweighted') as d:
            config = ExperimentConfig.load(d.config)
            self.assertEqual(config.run.output_dir, d.out)
            with self.assertRaises(ConfigError):
                ExperimentConfig.load(d.root / 'missing.json')

    def test_run_round_trip(self):
        run = RunOptions.from_block({'grid_sizes': [8, 16], 'beta': 0.02})
        again = RunOptions.from_block(run.to_json())
        self.assertEqual(again.to_json(), run.to_json())
        with self.assertRaises(ConfigError):
            RunOptions.from_block(['not', 'a', 'mapping'])


class TestArtifacts(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_json_document(self):
        path = artifacts.write_json(self.root / 'deep' / 'a.json', {
            'b': np.arange(3), 'a': math.nan, 'c': np.float64(-math.inf),
            'd': (np.int64(2), np.bool_(True))})
        text = path.read_text()
        data = json.loads(text)
        self.assertEqual(data, {'a': 'nan', 'b': [0, 1, 2], 'c': '-inf',
                                'd': [2, True], 'schema': 1})
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(sorted(p.name for p in path.parent.iterdir()),
                         ['a.json'])

    def test_atomic_overwrite(self):
        path = self.root / 'x.txt'
        artifacts.write_atomic(path, 'first')
        artifacts.write_atomic(path, 'second')
        self.assertEqual(path.read_text(), 'second')
        self.assertEqual([p.name for p in self.root.iterdir()], ['x.txt'])

    def test_csv(self):
        path = artifacts.write_csv(self.root / 'c.csv', ['lambda', 'mu'], [
            {'lambda': 0.1, 'mu': None}, {'lambda': 2, 'mu': 1.5}])
        self.assertEqual(path.read_text(), 'lambda,mu\n0.1,\n2,1.5\n')

    def test_triplets(self):
        A, _ = testutils.dirichlet_laplacian_1d(4)
        path = artifacts.write_triplets(self.root / 'A.txt', A)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], '0 0 8.0')
        self.assertEqual(lines[1], '0 1 -4.0')
        self.assertEqual(len(lines), 7)

    def test_plot_script(self):
        path = artifacts.write_plot_script(self.root / 'c.gp', 'c.csv',
                                           plateau=1.0, quantity='nu')
        text = path.read_text()
        self.assertIn('plateau = 1.0', text)
        self.assertIn("plot 'c.csv'", text)

    def test_index(self):
        index = artifacts.ArtifactIndex(self.root)
        index.add('curve', index.path('curve.json'))
        index.add('ik', index.path('ik.json'))
        self.assertEqual(index.entries(), {'curve': 'curve.json',
                                           'ik': 'ik.json'})
        self.assertEqual(index.names(), ['curve.json', 'ik.json'])
        self.assertEqual([k for k, _ in index], ['curve', 'ik'])
