# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (test_optim_adamw.py) is part of loft_optim                       -
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
from loft_optim.linalg import projector, ShapeMismatchException
from loft_optim.loft_state import AlternatingState, LoftAdamState
from loft_optim.optim_adamw import (FullAdamState, FullMomentumState, LoraAdamState, LoftMomentumState,
                                    adamw_full_step, gd_momentum_full_step, lora_adamw_step, loft_gd_step,
                                    loft_gd_momentum_step, loft_adamw_step)
from loft_optim.problems import gen_rank_r_target, mf_loss_grad, least_squares_factor
from loft_optim.util import seeded_rng


def _relative(value, reference):
    return np.linalg.norm(value - reference) / max(1.0, np.linalg.norm(reference))


class TestFullAdamW(TestCase):
    def setUp(self):
        rng = seeded_rng(0)
        self.w = rng.standard_normal((4, 3))
        self.grad = rng.standard_normal((4, 3))
        self.cfg = replace(OptimizerConfig(), eta=0.1)

    def test_first_step_is_bias_corrected(self):
        state = FullAdamState((4, 3))
        w1 = adamw_full_step(self.w, self.grad, state, self.cfg)
        expected = self.w - 0.1 * self.grad / (np.abs(self.grad) + self.cfg.eps)
        np.testing.assert_allclose(w1, expected, rtol=1e-12, atol=1e-14)
        self.assertEqual(state.step, 1)

    def test_eps_inside_sqrt(self):
        cfg = replace(self.cfg, eps_inside_sqrt=True)
        w1 = adamw_full_step(self.w, self.grad, FullAdamState((4, 3)), cfg)
        expected = self.w - 0.1 * self.grad / np.sqrt(self.grad ** 2 + cfg.eps)
        np.testing.assert_allclose(w1, expected, rtol=1e-12, atol=1e-14)

    def test_decoupled_weight_decay(self):
        cfg = replace(self.cfg, weight_decay=0.5)
        w1 = adamw_full_step(self.w, np.zeros((4, 3)), FullAdamState((4, 3)), cfg)
        np.testing.assert_allclose(w1, (1 - 0.05) * self.w)

    def test_explicit_eta(self):
        w1 = adamw_full_step(self.w, self.grad, FullAdamState((4, 3)), self.cfg, eta=0.0)
        np.testing.assert_array_equal(w1, self.w)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatchException):
            adamw_full_step(self.w, self.grad.T, FullAdamState((4, 3)), self.cfg)

    def test_input_not_mutated(self):
        w = self.w.copy()
        adamw_full_step(w, self.grad, FullAdamState((4, 3)), self.cfg)
        np.testing.assert_array_equal(w, self.w)


class TestGDMomentum(TestCase):
    def test_zero_momentum_is_gd(self):
        target = gen_rank_r_target(5, 4, 2, seed=1)
        cfg = replace(OptimizerConfig(), eta=0.3, beta1=0.0)
        w = np.zeros((5, 4))
        _, grad = mf_loss_grad(w, target)
        w1 = gd_momentum_full_step(w, grad, FullMomentumState((5, 4)), cfg)
        np.testing.assert_allclose(w1, w - 0.3 * grad)

    def test_momentum_average(self):
        cfg = replace(OptimizerConfig(), eta=1.0, beta1=0.5)
        state = FullMomentumState((1, 1))
        w = gd_momentum_full_step(np.zeros((1, 1)), np.ones((1, 1)), state, cfg)
        w = gd_momentum_full_step(w, np.ones((1, 1)), state, cfg)
        np.testing.assert_allclose(state.m, [[0.75]])
        np.testing.assert_allclose(w, [[-1.25]])


class TestLoraAdamW(TestCase):
    def test_both_factors_move(self):
        target = gen_rank_r_target(6, 5, 2, seed=0)
        adapter = init_adapter(6, 5, 2, seed=1, init='gaussian')
        u0, v0 = adapter.u.copy(), adapter.v.copy()
        state = LoraAdamState(6, 5, 2)
        lora_adamw_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state,
                        replace(OptimizerConfig(), eta=0.01))
        self.assertFalse(np.allclose(adapter.u, u0))
        self.assertFalse(np.allclose(adapter.v, v0))
        self.assertEqual((state.step, state.u.step, state.v.step), (1, 1, 1))
        self.assertEqual(state.state_size(), 2 * (6 * 2 + 5 * 2))

    def test_lora_init_moves_u_only(self):
        target = gen_rank_r_target(6, 5, 2, seed=0)
        adapter = init_adapter(6, 5, 2, seed=1)
        v0 = adapter.v.copy()
        lora_adamw_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], LoraAdamState(6, 5, 2),
                        replace(OptimizerConfig(), eta=0.01))
        np.testing.assert_array_equal(adapter.v, v0)
        self.assertGreater(np.abs(adapter.u).max(), 0)


class TestLoftGD(TestCase):
    def setUp(self):
        self.target = gen_rank_r_target(7, 6, 3, seed=2)
        self.adapter = init_adapter(7, 6, 2, seed=3, init='gaussian')
        self.cfg = replace(OptimizerConfig(), eta=0.2)

    def _step(self, state, cfg=None):
        grad = mf_loss_grad(self.adapter.effective_weight(), self.target)[1]
        before = self.adapter.copy()
        loft_gd_step(self.adapter, grad, state, cfg or self.cfg)
        return before, grad

    def test_alternation(self):
        state = AlternatingState()
        before, _ = self._step(state)
        self.assertFalse(np.array_equal(before.u, self.adapter.u))
        np.testing.assert_array_equal(before.v, self.adapter.v)
        before, _ = self._step(state)
        np.testing.assert_array_equal(before.u, self.adapter.u)
        self.assertFalse(np.array_equal(before.v, self.adapter.v))

    def test_v_first(self):
        state = AlternatingState(update_u_first=False)
        before, _ = self._step(state)
        np.testing.assert_array_equal(before.u, self.adapter.u)

    def test_u_step_projects_gradient(self):
        before, grad = self._step(AlternatingState())
        expected = before.effective_weight() - 0.2 * grad @ projector(before.v)
        np.testing.assert_allclose(self.adapter.effective_weight(), expected, atol=1e-10)

    def test_unit_step_is_least_squares(self):
        cfg = replace(self.cfg, eta=1.0)
        expected = least_squares_factor(self.adapter, self.target, 'u')
        self._step(AlternatingState(), cfg)
        np.testing.assert_allclose(self.adapter.u, expected, atol=1e-9)
        expected = least_squares_factor(self.adapter, self.target, 'v')
        self._step(AlternatingState(update_u_first=False), cfg)
        np.testing.assert_allclose(self.adapter.v, expected, atol=1e-9)

    def test_simultaneous_updates(self):
        cfg = replace(self.cfg, alternating=False)
        state = AlternatingState()
        before, _ = self._step(state, cfg)
        self.assertFalse(np.array_equal(before.u, self.adapter.u))
        self.assertFalse(np.array_equal(before.v, self.adapter.v))
        self.assertTrue(state.update_u_next)

    def test_previous_iterates_recorded(self):
        before, _ = self._step(AlternatingState())
        np.testing.assert_array_equal(self.adapter.u_prev, before.u)


class TestLoftGDMomentum(TestCase):
    def test_matches_full_momentum_inside_target_subspace(self):
        target = gen_rank_r_target(8, 6, 2, seed=100)
        adapter = init_adapter(8, 6, 2, seed=101, init='subspace', target=target)
        cfg = replace(OptimizerConfig(), eta=0.5, beta1=0.9)
        w = adapter.effective_weight()
        state, full_state = LoftMomentumState(8, 6, 2), FullMomentumState((8, 6))
        for _ in range(20):
            loft_gd_momentum_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
            w = gd_momentum_full_step(w, mf_loss_grad(w, target)[1], full_state, cfg)
            self.assertLess(_relative(adapter.effective_weight(), w), 1e-8)


class TestLoftAdamW(TestCase):
    def test_first_u_step(self):
        target = gen_rank_r_target(6, 5, 3, seed=7)
        adapter = init_adapter(6, 5, 2, seed=8, init='gaussian')
        cfg = replace(OptimizerConfig(), eta=0.05)
        before = adapter.copy()
        grad = mf_loss_grad(adapter.effective_weight(), target)[1]
        loft_adamw_step(adapter, grad, LoftAdamState(6, 5, 2), cfg)
        p_v = projector(before.v)
        projected = grad @ p_v
        expected = before.effective_weight() - 0.05 * (projected / (np.abs(projected) + cfg.eps)) @ p_v
        np.testing.assert_allclose(adapter.effective_weight(), expected, atol=1e-8)

    def test_full_rank_recovers_adamw(self):
        target = gen_rank_r_target(6, 6, 2, seed=0)
        adapter = init_adapter(6, 6, 6, seed=1, init='gaussian')
        cfg = replace(OptimizerConfig(), eta=0.05)
        w = adapter.effective_weight()
        state, full_state = LoftAdamState(6, 6, 6), FullAdamState((6, 6))
        for _ in range(40):
            loft_adamw_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
            w = adamw_full_step(w, mf_loss_grad(w, target)[1], full_state, cfg)
        self.assertLess(_relative(adapter.effective_weight(), w), 1e-5)
        self.assertEqual(state.step, 40)

    def test_state_size(self):
        self.assertEqual(LoftAdamState(6, 5, 2).state_size(), 6 * 2 + 5 * 2 + 6 * 4 + 5 * 4)
