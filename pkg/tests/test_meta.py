# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import unittest

from numlab import hardy
from numlab.hardy import meta
from numlab.hardy.errors import ConfigError


class TestMeta(unittest.TestCase):
    def test_registry_holds_every_kind(self):
        registry = meta.get_scenario_registry()
        self.assertEqual(set(registry),
                         {kind.value for kind in meta.ScenarioKind})
        self.assertIs(registry['flat_slab'], hardy.FlatSlab)
        self.assertIs(registry['ball_equator'], hardy.BallEquator)
        self.assertIs(registry['parametric_curve'],
                      hardy.ParametricCurveOnSphere)

    def test_registry_is_a_copy(self):
        registry = meta.get_scenario_registry()
        registry.pop('flat_slab')  # type: ignore
        self.assertIn('flat_slab', meta.get_scenario_registry())

    def test_duplicate_kind_is_rejected(self):
        with self.assertRaisesRegex(RuntimeError, 'already been registered'):
            class Another(hardy.FlatSlab,
                          kind=meta.ScenarioKind.FLAT_SLAB):
                pass

    def test_kind_of_class_and_instance(self):
        self.assertIs(hardy.FlatSlab.kind, meta.ScenarioKind.FLAT_SLAB)
        self.assertIs(hardy.BallEquator().kind,
                      meta.ScenarioKind.BALL_EQUATOR)

    def test_scenario_from_config(self):
        s = meta.scenario_from_config(
            {'kind': 'flat_slab', 'N': 4, 'k': 2, 'beta': 0.2})
        self.assertIsInstance(s, hardy.FlatSlab)
        self.assertEqual((s.N, s.k, s.beta), (4, 2, 0.2))
        self.assertEqual(s.plateau, 1.0)

    def test_scenario_from_config_round_trip(self):
        s = hardy.BallEquator(beta=0.1)
        again = hardy.Scenario.from_config(s.to_config())
        self.assertEqual(again.to_config(), s.to_config())

    def test_unknown_kind(self):
        with self.assertRaises(ConfigError) as cm:
            meta.scenario_from_config({'kind': 'torus'})
        self.assertEqual(cm.exception.field, 'scenario.kind')
        self.assertIn('flat_slab', str(cm.exception))

    def test_missing_kind(self):
        with self.assertRaises(ConfigError) as cm:
            meta.scenario_from_config({'N': 3})
        self.assertEqual(cm.exception.field, 'scenario.kind')

    def test_not_an_object(self):
        with self.assertRaises(ConfigError) as cm:
            meta.scenario_from_config(['flat_slab'])  # type: ignore
        self.assertEqual(cm.exception.field, 'scenario')

    def test_bad_options_become_config_errors(self):
        with self.assertRaises(ConfigError) as cm:
            meta.scenario_from_config({'kind': 'flat_slab', 'radius': 2})
        self.assertEqual(cm.exception.field, 'scenario')

        with self.assertRaisesRegex(ConfigError, 'k must lie'):
            meta.scenario_from_config({'kind': 'flat_slab', 'N': 3, 'k': 2})
