# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (optim_adamw.py) is part of loft_optim                            -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Steppers of the gradient-descent / AdamW family.

Reference full-parameter optimizers (:py:func:`adamw_full_step`, :py:func:`gd_momentum_full_step`) return the new
dense weight. Low-rank steppers (:py:func:`lora_adamw_step` and the ``loft_*`` functions) update the adapter in place
and return it. Every stepper mutates its own state object and accepts an explicit ``eta`` (for schedules) and
``grad_scale`` (for clipping across several layers); without ``grad_scale`` the layer is clipped on its own
according to ``cfg.clip_threshold``.
"""

import numpy as np

from .adapter import factor_grads, scaled_grads
from .clip import LayerGradView, lowrank_view, effective_global_norm, clip_scale
from .config import OptimizerConfig
from .linalg import as_matrix, gram_inverse, ShapeMismatchException
from .loft_state import (OptimizerState, AlternatingState, LoftAdamState, calibration_matrices, update_first_moments,
                         update_cross_terms, reconstruct_first_moment, reconstruct_second_moment,
                         clamp_second_moment)
from .util import logger

__all__ = ['OptimizerConfig', 'FullAdamState', 'FullMomentumState', 'LoraAdamState', 'LoftMomentumState',
           'adamw_full_step', 'gd_momentum_full_step', 'lora_adamw_step', 'loft_gd_step', 'loft_gd_momentum_step',
           'loft_adamw_step', 'prepare_dense_step', 'prepare_lowrank_step', 'apply_lowrank_update']


class FullAdamState(OptimizerState):
    """
    AdamW moments ``m`` and ``v`` of a dense parameter, zero at step 0.

    :param shape: shape of the parameter
    :type shape: tuple[int, int]
    """
    def __init__(self, shape):
        OptimizerState.__init__(self)
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def buffers(self):
        return {'m': self.m, 'v': self.v}


class FullMomentumState(OptimizerState):
    """
    Momentum buffer of a dense parameter for heavy-ball GD.
    """
    def __init__(self, shape):
        OptimizerState.__init__(self)
        self.m = np.zeros(shape)

    def buffers(self):
        return {'m': self.m}


class LoraAdamState(OptimizerState):
    """
    Independent AdamW states of both factors of the naive LoRA baseline.
    """
    def __init__(self, m, n, r):
        OptimizerState.__init__(self)
        self.u = FullAdamState((m, r))
        self.v = FullAdamState((n, r))

    def buffers(self):
        return {'m_u': self.u.m, 'v_u': self.u.v, 'm_v': self.v.m, 'v_v': self.v.v}

    def load_buffers(self, buffers):
        """
        Restore the factor moments. Set ``step`` first: the factor states count bias-correction steps in lockstep.
        """
        self.u.load_buffers({'m': buffers['m_u'], 'v': buffers['v_u']})
        self.v.load_buffers({'m': buffers['m_v'], 'v': buffers['v_v']})
        self.u.step = self.v.step = self.step


class LoftMomentumState(AlternatingState):
    """
    First moments of LoFT-GD with momentum (no second-moment buffers).
    """
    def __init__(self, m, n, r, update_u_first=True):
        AlternatingState.__init__(self, update_u_first)
        self.m_u = np.zeros((m, r))
        self.m_v = np.zeros((n, r))

    def buffers(self):
        return {'m_u': self.m_u, 'm_v': self.m_v}


def _adam_denominator(v_hat, cfg):
    if cfg.eps_inside_sqrt:
        return np.sqrt(v_hat + cfg.eps)
    return np.sqrt(v_hat) + cfg.eps


def prepare_dense_step(w, grad_w, state, cfg, grad_scale=None):
    """
    Shared first half of the full-parameter steppers: shape check, gradient norm, clipping and step counter.

    :return: the weight and the clipped gradient
    :rtype: tuple[numpy.ndarray, numpy.ndarray]
    """
    w, grad_w = as_matrix(w, 'w'), as_matrix(grad_w, 'grad_w')
    if w.shape != grad_w.shape:
        raise ShapeMismatchException('gradient shape {} does not match weight shape {}'
                                     .format(grad_w.shape, w.shape))
    state.grad_norm = effective_global_norm([LayerGradView(grad_w, None)])
    if grad_scale is None:
        grad_scale = clip_scale(state.grad_norm, cfg.clip_threshold)
    state.step += 1
    return w, grad_scale * grad_w


def adamw_full_step(w, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    One AdamW step with bias correction and decoupled weight decay:
    ``w+ = (1 - lambda*eta) w - eta * m_hat / (sqrt(v_hat) + eps)``.

    :param w: current weight
    :param grad_w: gradient at ``w``
    :type state: FullAdamState
    :type cfg: OptimizerConfig
    :param eta: step size of this step, ``cfg.eta`` if omitted
    :param grad_scale: clipping factor computed by the caller
    :return: the new weight
    :rtype: numpy.ndarray
    """
    eta = cfg.eta if eta is None else eta
    w, grad = prepare_dense_step(w, grad_w, state, cfg, grad_scale)
    k = state.step
    state.m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad
    state.v = cfg.beta2 * state.v + (1 - cfg.beta2) * grad * grad
    m_hat = state.m / (1 - cfg.beta1 ** k)
    v_hat = state.v / (1 - cfg.beta2 ** k)
    return (1 - cfg.weight_decay * eta) * w - eta * m_hat / _adam_denominator(v_hat, cfg)


def gd_momentum_full_step(w, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    Heavy-ball GD in exponential-average form: ``m <- beta1 m + (1 - beta1) g`` and ``w+ = w - eta m``.
    With ``beta1 = 0`` this is plain gradient descent.

    :type state: FullMomentumState
    :type cfg: OptimizerConfig
    :rtype: numpy.ndarray
    """
    eta = cfg.eta if eta is None else eta
    w, grad = prepare_dense_step(w, grad_w, state, cfg, grad_scale)
    state.m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad
    return (1 - cfg.weight_decay * eta) * w - eta * state.m


def lora_adamw_step(adapter, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    Naive LoRA baseline: simultaneous AdamW steps on both raw factor gradients with independent moments, no
    projection and no calibration. The LoRA scale ``alpha`` is carried by ``adapter.scale``.

    :type adapter: .adapter.LowRankAdapter
    :type state: LoraAdamState
    :type cfg: OptimizerConfig
    :rtype: .adapter.LowRankAdapter
    """
    grad_u, grad_v = factor_grads(grad_w, adapter)
    state.grad_norm = effective_global_norm([LayerGradView(as_matrix(grad_w, 'grad_w'), None)])
    if grad_scale is None:
        grad_scale = clip_scale(state.grad_norm, cfg.clip_threshold)
    state.step += 1
    adapter.snapshot()
    new_u = adamw_full_step(adapter.u, grad_u, state.u, cfg, eta, grad_scale)
    new_v = adamw_full_step(adapter.v, grad_v, state.v, cfg, eta, grad_scale)
    adapter.u, adapter.v = new_u, new_v
    return adapter


def prepare_lowrank_step(adapter, grad_w, state, cfg, grad_scale=None):
    """
    Shared first half of every LoFT step: factor gradients, calibration matrices (against the previous iterates),
    scaled gradients, effective-gradient norm and clipping, step counter and snapshot of the current factors.

    :return: calibration pair, clipped scaled gradients of ``U`` and ``V`` and whether ``U`` is the active factor
    :rtype: tuple
    """
    grad_u, grad_v = factor_grads(grad_w, adapter)
    calib = calibration_matrices(adapter)
    scaled = scaled_grads(grad_u, grad_v, adapter)
    update_u = state.update_u_next if cfg.alternating else True
    state.grad_norm = effective_global_norm([lowrank_view(scaled, adapter, update_u)])
    if grad_scale is None:
        grad_scale = clip_scale(state.grad_norm, cfg.clip_threshold)
    state.step += 1
    adapter.snapshot()
    return calib, grad_scale * scaled.u, grad_scale * scaled.v, update_u


def apply_lowrank_update(adapter, state, cfg, eta, direction, update_u):
    """
    Shared second half of every LoFT step. With alternation only the active factor moves,
    ``X+ = (1 - lambda*eta) X - eta * direction(X)``, and the flag flips. Without alternation both factors move,
    their directions being evaluated at the same iterate.

    :param direction: callable mapping ``'u'`` or ``'v'`` to the factor's update direction
    :type direction: callable
    """
    decay = 1 - cfg.weight_decay * eta
    if cfg.alternating:
        if update_u:
            adapter.u = decay * adapter.u - eta * direction('u')
        else:
            adapter.v = decay * adapter.v - eta * direction('v')
        state.update_u_next = not update_u
        logger.debug('Step {}: updated {}'.format(state.step, 'U' if update_u else 'V'))
    else:
        delta_u, delta_v = direction('u'), direction('v')
        adapter.u = decay * adapter.u - eta * delta_u
        adapter.v = decay * adapter.v - eta * delta_v
    return adapter


def _project_onto(full_direction, factor):
    # right-multiplying with F (F^T F)^{-1} maps a full-space direction D to factor coordinates, D P_F = X F^T
    return full_direction @ factor @ gram_inverse(factor).inverse


def loft_gd_step(adapter, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    LoFT gradient descent: alternating steps with scaled gradients. A ``U`` step yields
    ``W+ = W - eta * grad_w @ P_V``; with ``eta = 1`` on the matrix-factorization loss this is one half-step of
    alternating least squares.

    :type adapter: .adapter.LowRankAdapter
    :param state: carries the step counter and the alternation flag
    :type state: .loft_state.AlternatingState
    :type cfg: OptimizerConfig
    :rtype: .adapter.LowRankAdapter
    """
    eta = cfg.eta if eta is None else eta
    _, grad_u, grad_v, update_u = prepare_lowrank_step(adapter, grad_w, state, cfg, grad_scale)
    directions = {'u': grad_u, 'v': grad_v}
    return apply_lowrank_update(adapter, state, cfg, eta, directions.__getitem__, update_u)


def loft_gd_momentum_step(adapter, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    LoFT gradient descent with calibrated momentum. Both first moments are recalibrated and updated every step; the
    active factor moves along ``(m_u V^T) V (V^T V)^{-1}``. Started inside the dominant singular subspaces of a
    matrix-factorization target it reproduces full heavy-ball GD exactly.

    :type state: LoftMomentumState
    :type cfg: OptimizerConfig
    :rtype: .adapter.LowRankAdapter
    """
    eta = cfg.eta if eta is None else eta
    calib, grad_u, grad_v, update_u = prepare_lowrank_step(adapter, grad_w, state, cfg, grad_scale)
    update_first_moments(state, calib, grad_u, grad_v, cfg.beta1, cfg)

    def direction(factor):
        if factor == 'u':
            return _project_onto(reconstruct_first_moment(state.m_u, adapter.v), adapter.v)
        return _project_onto(reconstruct_first_moment(state.m_v, adapter.u), adapter.u)

    return apply_lowrank_update(adapter, state, cfg, eta, direction, update_u)


def loft_adamw_step(adapter, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    LoFT-AdamW with alternating updates.

    Per step: factor gradients, calibration matrices, scaled gradients, recalibrated first moments and cross terms of
    both factors. For the active factor (``U`` shown) the bias-corrected full-space moments
    ``m~ = m_u V^T / (1 - beta1^k)`` and ``v~ = p_u (V^T * V^T) / (1 - beta2^k)`` form the AdamW direction
    ``m~ / (sqrt(v~) + eps)``, which is mapped back through ``V (V^T V)^{-1}`` and applied together with decoupled
    weight decay on that factor only. Negative entries of ``v~`` are clamped and counted in ``state.clamps``.

    With ``r = max(m, n)`` and full-rank factors the induced weight trajectory equals :py:func:`adamw_full_step`.

    :type adapter: .adapter.LowRankAdapter
    :type state: .loft_state.LoftAdamState
    :type cfg: OptimizerConfig
    :rtype: .adapter.LowRankAdapter
    """
    eta = cfg.eta if eta is None else eta
    calib, grad_u, grad_v, update_u = prepare_lowrank_step(adapter, grad_w, state, cfg, grad_scale)
    update_first_moments(state, calib, grad_u, grad_v, cfg.beta1, cfg)
    update_cross_terms(state, calib, grad_u, grad_v, cfg.beta2, cfg)
    k = state.step

    def direction(factor):
        if factor == 'u':
            first, cross, other = state.m_u, state.p_u, adapter.v
        else:
            first, cross, other = state.m_v, state.p_v, adapter.u
        m_tilde = reconstruct_first_moment(first, other) / (1 - cfg.beta1 ** k)
        v_tilde, clamped = clamp_second_moment(reconstruct_second_moment(cross, other) / (1 - cfg.beta2 ** k))
        state.clamps += clamped
        return _project_onto(m_tilde / _adam_denominator(v_tilde, cfg), other)

    return apply_lowrank_update(adapter, state, cfg, eta, direction, update_u)
