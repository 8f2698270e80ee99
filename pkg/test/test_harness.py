# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (test_harness.py) is part of loft_optim                           -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------

from unittest import TestCase
import json
import logging
import os
import tempfile

import numpy as np
import pandas as pd

try:
    # noinspection PyPackageRequirements
    import mock
except ImportError:
    import unittest.mock as mock

from loft_optim.config import InvalidConfigException
from loft_optim.harness import (CSV_COLUMNS, ExperimentConfig, NumericalBlowupException, resolve_config, load_config,
                                run_experiment, run_batch, compare_runs, max_relative_deviation, scheduled_eta,
                                deep_merge)
from loft_optim.presets import list_presets, load_preset
from loft_optim.stepper import LoftAdamWStepper
from loft_optim.util import logger

logger.setLevel(logging.ERROR)


def _document(**overrides):
    document = {'version': 1, 'name': 'small', 'problem': {'m': 6, 'n': 5, 'target_rank': 2, 'seed': 0},
                'adapter': {'rank': 2, 'seed': 1}, 'method': 'loft_adamw', 'optimizer': {'eta': 0.02},
                'iterations': 15}
    return deep_merge(document, overrides)


class TestConfigResolution(TestCase):
    def test_single_run(self):
        configs = resolve_config(_document())
        self.assertEqual(len(configs), 1)
        cfg = configs[0]
        self.assertIsInstance(cfg, ExperimentConfig)
        self.assertEqual(cfg.problem.m, 6)
        self.assertEqual(cfg.optimizer.eta, 0.02)
        self.assertEqual(cfg.optimizer.beta2, 0.999)

    def test_runs_are_merged(self):
        document = _document(runs=[{'name': 'a'}, {'name': 'b', 'method': 'full_adamw',
                                                   'optimizer': {'beta1': 0.8}}])
        first, second = resolve_config(document)
        self.assertEqual((first.name, second.name), ('a', 'b'))
        self.assertEqual(second.method, 'full_adamw')
        self.assertEqual(second.optimizer.eta, 0.02)
        self.assertEqual(second.optimizer.beta1, 0.8)
        self.assertEqual(first.optimizer.beta1, 0.9)

    def test_seed_override(self):
        cfg = resolve_config(_document(), seed_override=42)[0]
        self.assertEqual((cfg.problem.seed, cfg.adapter.seed), (42, 42))

    def _assert_invalid(self, document, path):
        with self.assertRaises(InvalidConfigException) as context:
            resolve_config(document)
        self.assertTrue(context.exception.args[0].startswith(path + ':'), context.exception.args[0])

    def test_errors_name_the_field(self):
        self._assert_invalid(_document(optimizer={'beta1': 1.5}), 'optimizer.beta1')
        self._assert_invalid(_document(optimizer={'betaa': 0.5}), 'optimizer.betaa')
        self._assert_invalid(_document(problem={'m': 'six'}), 'problem.m')
        self._assert_invalid(_document(problem={'target_rank': 9}), 'problem.target_rank')
        self._assert_invalid(_document(adapter={'init': 'orthogonal'}), 'adapter.init')
        self._assert_invalid(_document(method='sgd'), 'method')
        self._assert_invalid(_document(iterations=0), 'iterations')
        self._assert_invalid(_document(schedule='cosine'), 'schedule')
        self._assert_invalid(_document(runs=[{'name': 'a'}, {'name': 'b', 'optimizer': {'eps': -1}}]),
                             'runs[1].optimizer.eps')

    def test_cross_field_checks(self):
        self._assert_invalid(_document(optimizer={'alpha': 2.0}), 'optimizer.alpha')
        self._assert_invalid(_document(adapter={'init': 'subspace', 'rank': 3}), 'adapter.rank')

    def test_version(self):
        document = _document()
        del document['version']
        self._assert_invalid(document, 'version')
        self._assert_invalid(_document(version=2), 'version')

    def test_runs(self):
        self._assert_invalid(_document(runs=[]), 'runs')
        self._assert_invalid(_document(runs=[{'method': 'loft_gd'}]), 'runs[0]')
        self._assert_invalid(_document(runs=[{'name': 'a'}, {'name': 'a'}]), 'runs')

    def test_boolean_is_not_a_number(self):
        self._assert_invalid(_document(optimizer={'eta': True}), 'optimizer.eta')

    def test_load_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            with open(path, 'w') as f:
                json.dump(_document(), f)
            self.assertEqual(load_config(path)[0].name, 'small')
            with open(path, 'w') as f:
                f.write('{"version": 1,')
            with self.assertRaises(InvalidConfigException):
                load_config(path)

    def test_presets_resolve(self):
        for name in list_presets():
            self.assertGreater(len(resolve_config(load_preset(name))), 0, name)

    def test_to_dict_round_trip(self):
        cfg = resolve_config(_document())[0]
        document = dict(cfg.to_dict(), version=1)
        self.assertEqual(resolve_config(document)[0], cfg)


class TestRuns(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_deterministic(self):
        cfg = resolve_config(_document())[0]
        first, second = run_experiment(cfg), run_experiment(cfg)
        pd.testing.assert_frame_equal(first.trajectory, second.trajectory)
        self.assertEqual(first.summary, second.summary)

    def test_trajectory(self):
        result = run_experiment(resolve_config(_document())[0])
        self.assertEqual(list(result.trajectory.columns), CSV_COLUMNS)
        self.assertEqual(list(result.trajectory['step']), list(range(1, 16)))
        self.assertTrue((result.trajectory['ms'] == 0).all())
        self.assertLess(result.summary['final_loss'], result.summary['initial_loss'])
        self.assertEqual(result.summary['final_loss'], result.trajectory['loss'].iloc[-1])

    def test_outputs_written(self):
        cfg = resolve_config(_document(checkpoint=True))[0]
        run_experiment(cfg, self.tmp.name)
        csv_path = os.path.join(self.tmp.name, 'small.csv')
        with open(csv_path) as f:
            self.assertEqual(f.readline().strip(), ','.join(CSV_COLUMNS))
        self.assertEqual(len(pd.read_csv(csv_path)), 15)
        with open(os.path.join(self.tmp.name, 'small.json')) as f:
            summary = json.load(f)
        for key in ('name', 'config', 'initial_loss', 'final_loss', 'final_grad_norm', 'clamps', 'state_size'):
            self.assertIn(key, summary)
        self.assertEqual(summary['config']['method'], 'loft_adamw')
        self.assertNotIn('wall_time_s', summary)
        self.assertTrue(os.path.isfile(os.path.join(self.tmp.name, 'small.ckpt.json')))

    def test_timing(self):
        result = run_experiment(resolve_config(_document(record_timing=True))[0])
        self.assertIn('wall_time_s', result.summary)
        self.assertTrue((result.trajectory['ms'] >= 0).all())

    def test_keep_weights(self):
        result = run_experiment(resolve_config(_document())[0], keep_weights=True)
        self.assertEqual(len(result.weights), 16)
        np.testing.assert_array_equal(result.weights[-1], result.stepper.weight())

    def test_blowup(self):
        document = _document(method='full_gd_momentum', optimizer={'eta': 100.0, 'beta1': 0.0}, iterations=1000)
        with np.errstate(over='ignore', invalid='ignore'):
            with self.assertRaises(NumericalBlowupException) as context:
                run_experiment(resolve_config(document)[0])
        self.assertGreater(context.exception.step, 0)
        self.assertLess(context.exception.step, 1000)

    def test_singular_step_is_a_blowup(self):
        singular = [None, None, np.linalg.LinAlgError('Singular matrix')]
        with mock.patch.object(LoftAdamWStepper, 'step', side_effect=singular):
            with self.assertRaises(NumericalBlowupException) as context:
                run_experiment(resolve_config(_document())[0])
        self.assertEqual(context.exception.step, 3)

    @mock.patch('logging.Logger.warning')
    def test_clamp_warning(self, mocker):
        with mock.patch('loft_optim.optim_adamw.clamp_second_moment', side_effect=lambda v: (np.maximum(v, 0), 1)):
            result = run_experiment(resolve_config(_document())[0])
        self.assertEqual(result.summary['clamps'], 15)
        self.assertEqual(list(result.trajectory['clamps']), list(range(1, 16)))
        self.assertIn('clamped 15', mocker.call_args_list[-1][0][0])

    def test_schedule(self):
        cfg = resolve_config(_document(schedule='linear', iterations=10))[0]
        self.assertAlmostEqual(scheduled_eta(cfg, 0), 0.02)
        self.assertAlmostEqual(scheduled_eta(cfg, 5), 0.01)
        constant = resolve_config(_document())[0]
        self.assertEqual(scheduled_eta(constant, 7), 0.02)

    def test_batch_matches_serial(self):
        configs = resolve_config(_document(runs=[{'name': 'a'}, {'name': 'b', 'method': 'loft_muon'}]))
        serial = run_batch(configs)
        parallel = run_batch(configs, workers=2)
        self.assertEqual(serial, parallel)
        self.assertEqual([summary['name'] for summary in serial], ['a', 'b'])

    def test_compare_runs(self):
        summaries = [{'name': 'full', 'final_loss': 2.0}, {'name': 'loft', 'final_loss': 3.0}]
        self.assertEqual(compare_runs(summaries), {'full': 1.0, 'loft': 1.5})
        self.assertEqual(compare_runs(summaries, reference='loft')['full'], 2.0 / 3.0)
        with self.assertRaises(KeyError):
            compare_runs(summaries, reference='lora')


class TestPresetProperties(TestCase):
    def test_momentum_reduction_preset(self):
        full, loft = [run_experiment(cfg, keep_weights=True) for cfg in resolve_config(load_preset('lemma1'))]
        self.assertEqual((full.config.method, loft.config.method), ('full_gd_momentum', 'loft_gd_momentum'))
        self.assertLess(max_relative_deviation(loft.weights, full.weights), 1e-8)

    def test_fullrank_recovery_preset(self):
        configs = resolve_config(load_preset('fullrank_recovery'))
        full, loft = [run_experiment(cfg, keep_weights=True) for cfg in configs]
        self.assertLess(max_relative_deviation(loft.weights, full.weights), 1e-5)

    def test_adamw_comparison_preset(self):
        summaries = run_batch(resolve_config(load_preset('fig2')))
        self.assertEqual([summary['name'] for summary in summaries],
                         ['full_adamw', 'loft_adamw', 'lora_adamw', 'loft_no_alternation', 'loft_no_calibration'])
        against_full = compare_runs(summaries, reference='full_adamw')
        against_loft = compare_runs(summaries, reference='loft_adamw')
        self.assertLessEqual(against_full['loft_adamw'], 2.0)
        self.assertGreaterEqual(against_loft['loft_no_calibration'], 2.0)
