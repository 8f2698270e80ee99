# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (test_config.py) is part of loft_optim                            -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------

from dataclasses import dataclass
from unittest import TestCase
import logging

from loft_optim.config import OptimizerConfig, InvalidConfigException, from_dict, join_path
from loft_optim.util import logger

logger.setLevel(logging.CRITICAL)


@dataclass
class _Section(object):
    count: int = 1
    label: str = 'a'


@dataclass
class _Outer(object):
    section: _Section = None
    ratio: float = 0.5


class TestOptimizerConfig(TestCase):
    def test_defaults(self):
        cfg = OptimizerConfig()
        self.assertEqual((cfg.beta1, cfg.beta2, cfg.eps), (0.9, 0.999, 1e-8))
        self.assertTrue(cfg.alternating and cfg.first_moment_calibration and cfg.second_moment_calibration)
        self.assertTrue(cfg.update_u_first)
        self.assertIsNone(cfg.clip_threshold)
        self.assertIs(cfg.validate(), cfg)

    def test_from_dict(self):
        cfg = OptimizerConfig.from_dict({'eta': 1, 'clip_threshold': 2.5, 'nesterov': True})
        self.assertEqual((cfg.eta, cfg.clip_threshold, cfg.nesterov), (1, 2.5, True))

    def test_round_trip(self):
        cfg = OptimizerConfig(eta=0.1, weight_decay=0.01)
        self.assertEqual(OptimizerConfig.from_dict(cfg.to_dict()), cfg)

    def _assert_invalid(self, data, path):
        with self.assertRaises(InvalidConfigException) as context:
            OptimizerConfig.from_dict(data)
        self.assertTrue(context.exception.args[0].startswith(path + ':'), context.exception.args[0])

    def test_ranges(self):
        self._assert_invalid({'eta': 0}, 'optimizer.eta')
        self._assert_invalid({'beta2': 1.0}, 'optimizer.beta2')
        self._assert_invalid({'mu': -0.1}, 'optimizer.mu')
        self._assert_invalid({'eps': 0}, 'optimizer.eps')
        self._assert_invalid({'weight_decay': -1}, 'optimizer.weight_decay')
        self._assert_invalid({'clip_threshold': 0}, 'optimizer.clip_threshold')
        self._assert_invalid({'alpha': 0}, 'optimizer.alpha')
        self._assert_invalid({'ns_steps': 0}, 'optimizer.ns_steps')

    def test_kinds(self):
        self._assert_invalid({'alternating': 1}, 'optimizer.alternating')
        self._assert_invalid({'ns_steps': 2.5}, 'optimizer.ns_steps')
        self._assert_invalid({'clip_threshold': 'none'}, 'optimizer.clip_threshold')
        self._assert_invalid({'lr': 0.1}, 'optimizer.lr')
        self._assert_invalid([0.1], 'optimizer')


class TestFromDict(TestCase):
    def test_nested_sections(self):
        outer = from_dict(_Outer, {'section': {'count': 3}, 'ratio': 1},
                          'run', {'section': lambda value, path: from_dict(_Section, value, path)})
        self.assertEqual(outer.section, _Section(count=3))
        self.assertEqual(outer.ratio, 1)

    def test_nested_error_path(self):
        with self.assertRaises(InvalidConfigException) as context:
            from_dict(_Outer, {'section': {'label': 3}}, 'runs[2]',
                      {'section': lambda value, path: from_dict(_Section, value, path)})
        self.assertTrue(context.exception.args[0].startswith('runs[2].section.label:'))

    def test_join_path(self):
        self.assertEqual(join_path('', 'eta'), 'eta')
        self.assertEqual(join_path('optimizer', 'eta'), 'optimizer.eta')
