# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (test_stepper.py) is part of loft_optim                           -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------

from dataclasses import replace
from unittest import TestCase

import numpy as np

from loft_optim.adapter import init_adapter
from loft_optim.config import OptimizerConfig
from loft_optim.problems import gen_rank_r_target, mf_loss_grad
from loft_optim.stepper import (Stepper, STEPPERS, METHODS, UnknownMethodException, make_stepper, resolve_method,
                                FullAdamWStepper, LoftAdamWStepper, LoraAdamWStepper)


class TestResolution(TestCase):
    def test_all_methods_known(self):
        for method in ('full_adamw', 'full_gd_momentum', 'full_muon', 'lora_adamw', 'loft_gd', 'loft_gd_momentum',
                       'loft_adamw', 'loft_muon', 'loft_adamw_simple'):
            self.assertIn(method, METHODS)

    def test_unknown_method(self):
        with self.assertRaises(UnknownMethodException):
            resolve_method('sgd', OptimizerConfig())

    def test_alias_forces_flag(self):
        cfg = OptimizerConfig()
        cls, resolved = resolve_method('loft_adamw_simple', cfg)
        self.assertIs(cls, LoftAdamWStepper)
        self.assertFalse(resolved.second_moment_calibration)
        self.assertTrue(cfg.second_moment_calibration)


class TestSteppers(TestCase):
    def setUp(self):
        self.m, self.n, self.r = 6, 5, 2
        self.target = gen_rank_r_target(self.m, self.n, 2, seed=0)
        self.cfg = replace(OptimizerConfig(), eta=0.01)

    def _adapter(self, init='lora'):
        return init_adapter(self.m, self.n, self.r, seed=1, init=init)

    def test_dense_methods_start_from_effective_weight(self):
        adapter = self._adapter('gaussian')
        for method in ('full_adamw', 'full_gd_momentum', 'full_muon'):
            stepper = make_stepper(method, adapter, self.cfg)
            self.assertTrue(stepper.dense)
            np.testing.assert_array_equal(stepper.weight(), adapter.effective_weight())
            self.assertIsNot(stepper.weight(), adapter.w0)

    def test_adapter_methods_share_adapter(self):
        adapter = self._adapter()
        stepper = make_stepper('loft_gd', adapter, self.cfg)
        self.assertFalse(stepper.dense)
        self.assertIs(stepper.adapter, adapter)

    def test_every_method_reduces_loss(self):
        for method in STEPPERS:
            stepper = make_stepper(method, self._adapter('gaussian'), self.cfg)
            initial, grad = mf_loss_grad(stepper.weight(), self.target)
            for _ in range(20):
                stepper.step(grad)
                loss, grad = mf_loss_grad(stepper.weight(), self.target)
            self.assertLess(loss, initial, method)
            self.assertEqual(stepper.step_count, 20, method)

    def test_state_sizes(self):
        m, n, r = self.m, self.n, self.r
        expected = {'full_adamw': 2 * m * n, 'full_gd_momentum': m * n, 'full_muon': m * n,
                    'lora_adamw': 2 * (m + n) * r, 'loft_gd': (m + n) * r,
                    'loft_gd_momentum': 2 * (m + n) * r, 'loft_adamw': (m + n) * (r + r * r) + (m + n) * r,
                    'loft_muon': 2 * (m + n) * r}
        for method, size in expected.items():
            self.assertEqual(make_stepper(method, self._adapter(), self.cfg).state_size(), size, method)

    def test_lora_scale(self):
        adapter = self._adapter()
        stepper = make_stepper('lora_adamw', adapter, replace(self.cfg, alpha=4.0))
        self.assertIsInstance(stepper, LoraAdamWStepper)
        self.assertEqual(adapter.scale, 4.0)

    def test_v_first_order(self):
        stepper = make_stepper('loft_adamw', self._adapter('gaussian'), replace(self.cfg, update_u_first=False))
        self.assertFalse(stepper.state.update_u_next)

    def test_explicit_eta(self):
        stepper = make_stepper('full_adamw', self._adapter('gaussian'), self.cfg)
        before = stepper.weight().copy()
        stepper.step(mf_loss_grad(before, self.target)[1], eta=0.0)
        np.testing.assert_array_equal(stepper.weight(), before)

    def test_repr(self):
        self.assertIn('loft_muon', repr(make_stepper('loft_muon', self._adapter(), self.cfg)))


class TestDocumentation(TestCase):
    def test_step_documentation_inherited(self):
        self.assertEqual(FullAdamWStepper.step.__doc__, Stepper.step.__doc__)
        self.assertEqual(LoftAdamWStepper.new_state.__doc__, Stepper.new_state.__doc__)

    def test_abstract(self):
        with self.assertRaises(TypeError):
            # noinspection PyAbstractClass
            Stepper(OptimizerConfig())
