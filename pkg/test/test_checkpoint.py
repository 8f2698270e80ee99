# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (test_checkpoint.py) is part of loft_optim                        -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------

from dataclasses import replace
from unittest import TestCase
import json
import os
import tempfile

import numpy as np

from loft_optim.adapter import init_adapter
from loft_optim.checkpoint import (CHECKPOINT_VERSION, encode_matrix, decode_matrix, save_checkpoint,
                                   load_checkpoint)
from loft_optim.config import OptimizerConfig
from loft_optim.linalg import ShapeMismatchException
from loft_optim.problems import gen_rank_r_target, mf_loss_grad
from loft_optim.stepper import make_stepper


class TestMatrixCodec(TestCase):
    def test_row_major(self):
        document = encode_matrix(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        self.assertEqual(document, {'shape': [2, 3], 'values': [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]})

    def test_exact_after_json(self):
        matrix = np.array([[0.1, 1 / 3], [np.pi, -2e-300]])
        restored = decode_matrix(json.loads(json.dumps(encode_matrix(matrix))))
        np.testing.assert_array_equal(restored, matrix)

    def test_header_mismatch(self):
        with self.assertRaises(ShapeMismatchException):
            decode_matrix({'shape': [2, 2], 'values': [1.0, 2.0, 3.0]})


class TestResume(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'run.ckpt.json')
        self.target = gen_rank_r_target(6, 5, 2, seed=0)

    def tearDown(self):
        self.tmp.cleanup()

    @staticmethod
    def _advance(stepper, target, steps):
        for _ in range(steps):
            stepper.step(mf_loss_grad(stepper.weight(), target)[1])

    def _check_resume(self, method, cfg):
        stepper = make_stepper(method, init_adapter(6, 5, 2, seed=1, init='gaussian'), cfg)
        self._advance(stepper, self.target, 5)
        save_checkpoint(self.path, stepper, self.target, name='resume')
        checkpoint = load_checkpoint(self.path)
        self.assertEqual(checkpoint.name, 'resume')
        self.assertEqual(checkpoint.stepper.step_count, 5)
        np.testing.assert_array_equal(checkpoint.target.a, self.target.a)

        self._advance(stepper, self.target, 5)
        self._advance(checkpoint.stepper, checkpoint.target, 5)
        np.testing.assert_array_equal(checkpoint.stepper.weight(), stepper.weight())
        self.assertEqual(checkpoint.stepper.state.clamps, stepper.state.clamps)

    def test_loft_adamw(self):
        self._check_resume('loft_adamw', replace(OptimizerConfig(), eta=0.02))

    def test_loft_muon(self):
        self._check_resume('loft_muon', replace(OptimizerConfig(), eta=0.02))

    def test_lora_with_scale(self):
        self._check_resume('lora_adamw', replace(OptimizerConfig(), eta=0.02, alpha=2.0))

    def test_full_adamw(self):
        self._check_resume('full_adamw', replace(OptimizerConfig(), eta=0.02))

    def test_alias_keeps_forced_flag(self):
        stepper = make_stepper('loft_adamw_simple', init_adapter(6, 5, 2, seed=1), OptimizerConfig())
        save_checkpoint(self.path, stepper, self.target)
        self.assertFalse(load_checkpoint(self.path).stepper.cfg.second_moment_calibration)

    def test_version_written(self):
        stepper = make_stepper('loft_gd', init_adapter(6, 5, 2, seed=1), OptimizerConfig())
        save_checkpoint(self.path, stepper, self.target)
        with open(self.path) as f:
            document = json.load(f)
        self.assertEqual(document['version'], CHECKPOINT_VERSION)
        self.assertEqual(document['method'], 'loft_gd')
        self.assertTrue(document['state']['update_u_next'])
