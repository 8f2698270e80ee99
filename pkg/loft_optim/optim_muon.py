# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (optim_muon.py) is part of loft_optim                             -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Muon-family steppers: the quintic Newton-Schulz orthogonalization for dense and for factored inputs, reference Muon
on a dense weight and LoFT-Muon on a low-rank adapter.
"""

from dataclasses import dataclass

import numpy as np

from .config import config_error
from .linalg import as_matrix, lowrank_fro_norm, ShapeMismatchException
from .loft_state import AlternatingState, OptimizerState, identity_calibration
from .optim_adamw import prepare_dense_step, prepare_lowrank_step, apply_lowrank_update

__all__ = ['NewtonSchulzParams', 'FullMuonState', 'LoftMuonState', 'newton_schulz5', 'newton_schulz5_lowrank',
           'update_muon_moments', 'muon_full_step', 'loft_muon_step']


@dataclass(frozen=True)
class NewtonSchulzParams(object):
    """
    Iteration count, quintic coefficients and normalization guard of the Newton-Schulz iteration. The coefficients
    maximize the slope at zero while keeping the iteration bounded; singular values end up near, not at, one.
    """
    n_steps: int = 5
    a: float = 3.4445
    b: float = -4.7750
    c: float = 2.0315
    eps: float = 1e-7

    def __post_init__(self):
        if self.n_steps < 1:
            raise config_error('optimizer.ns_steps', 'must be at least 1')

    @classmethod
    def from_config(cls, cfg):
        """
        :type cfg: .config.OptimizerConfig
        :rtype: NewtonSchulzParams
        """
        return cls(n_steps=cfg.ns_steps)


class FullMuonState(OptimizerState):
    """
    Momentum buffer ``m`` of reference Muon.
    """
    def __init__(self, shape):
        OptimizerState.__init__(self)
        self.m = np.zeros(shape)

    def buffers(self):
        return {'m': self.m}


class LoftMuonState(AlternatingState):
    """
    LoFT-Muon keeps the two factor momenta only; no second-moment buffers exist.
    """
    def __init__(self, m, n, r, update_u_first=True):
        AlternatingState.__init__(self, update_u_first)
        self.m_u = np.zeros((m, r))
        self.m_v = np.zeros((n, r))

    def buffers(self):
        return {'m_u': self.m_u, 'm_v': self.m_v}


def newton_schulz5(g, params=None):
    """
    Approximate the orthogonal polar factor of ``g``: normalize by the Frobenius norm, then iterate
    ``X <- a X + (b A + c A^2) X`` with ``A = X X^T``. Tall inputs are transposed so that ``A`` is the smaller Gram
    matrix. A zero input returns zero.

    :param g: matrix of shape ``(m, n)``
    :type params: NewtonSchulzParams
    :rtype: numpy.ndarray
    """
    params = params or NewtonSchulzParams()
    g = as_matrix(g, 'g')
    x = g / (np.linalg.norm(g) + params.eps)
    transposed = g.shape[0] > g.shape[1]
    if transposed:
        x = x.T
    for _ in range(params.n_steps):
        a = x @ x.T
        b = params.b * a + params.c * (a @ a)
        x = params.a * x + b @ x
    return x.T if transposed else x


def newton_schulz5_lowrank(u, v, params=None):
    """
    Newton-Schulz for ``G = u @ v.T`` without forming ``G``. The iterate is kept as ``X = u X_c v^T`` with an
    ``r x r`` core ``X_c``, so one iteration costs ``O((m + n) r^2 + r^3)``:

    * ``S = X_c (v^T v) X_c^T`` is the core of ``X X^T``,
    * ``A_small = S (u^T u)``,
    * ``X_c <- a X_c + (b A_small + c A_small^2) X_c``.

    For ``m > n`` the roles of the factors are swapped first, mirroring the transpose of the dense iteration, and the
    result is read back from the swapped factor.

    :param u: left factor of shape ``(m, r)``
    :param v: right factor of shape ``(n, r)``
    :type params: NewtonSchulzParams
    :return: ``X_U`` of shape ``(m, r)`` with ``X_U @ v.T`` equal to ``newton_schulz5(u @ v.T)``
    :rtype: numpy.ndarray
    :raises ShapeMismatchException: if the factors have different ranks
    """
    params = params or NewtonSchulzParams()
    u, v = as_matrix(u, 'u'), as_matrix(v, 'v')
    if u.shape[1] != v.shape[1]:
        raise ShapeMismatchException('factors have ranks {} and {}'.format(u.shape[1], v.shape[1]))
    flipped = u.shape[0] > v.shape[0]
    if flipped:
        u, v = v, u
    utu, vtv = u.T @ u, v.T @ v
    x_c = np.eye(u.shape[1]) / (lowrank_fro_norm(u, v) + params.eps)
    for _ in range(params.n_steps):
        s = x_c @ vtv @ x_c.T
        a_small = s @ utu
        b_small = params.b * a_small + params.c * (a_small @ a_small)
        x_c = params.a * x_c + b_small @ x_c
    if flipped:
        # v holds the original left factor here
        return v @ x_c.T
    return u @ x_c


def update_muon_moments(state, calib, grad_u, grad_v, mu, flags):
    """
    ``m_u <- mu * m_u @ C^V + grad_u`` and ``m_v <- mu * m_v @ C^U + grad_v``, both every step. Unlike the Adam
    family the gradient enters without the ``(1 - mu)`` factor.

    :type state: LoftMuonState
    :type calib: .loft_state.CalibrationPair
    """
    if not flags.first_moment_calibration:
        calib = identity_calibration(state.m_u.shape[1])
    state.m_u = mu * (state.m_u @ calib.cv) + grad_u
    state.m_v = mu * (state.m_v @ calib.cu) + grad_v


def muon_full_step(w, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    Reference Muon: ``m <- mu m + g``, ``W+ = (1 - lambda*eta) W - eta * NS5(m)``. With ``cfg.nesterov`` the
    orthogonalized direction is ``g + mu m`` instead of ``m``.

    :type state: FullMuonState
    :type cfg: .config.OptimizerConfig
    :rtype: numpy.ndarray
    """
    eta = cfg.eta if eta is None else eta
    w, grad = prepare_dense_step(w, grad_w, state, cfg, grad_scale)
    state.m = cfg.mu * state.m + grad
    momentum = grad + cfg.mu * state.m if cfg.nesterov else state.m
    return (1 - cfg.weight_decay * eta) * w - eta * newton_schulz5(momentum, NewtonSchulzParams.from_config(cfg))


def loft_muon_step(adapter, grad_w, state, cfg, eta=None, grad_scale=None):
    """
    LoFT-Muon with alternating updates. Both calibrated factor momenta are updated every step; the active factor
    moves by ``U+ = (1 - lambda*eta) U - eta * newton_schulz5_lowrank(m_u, V)``, so the weight changes by the
    orthogonalized reconstructed momentum ``NS5(m_u V^T)``.

    :type adapter: .adapter.LowRankAdapter
    :type state: LoftMuonState
    :type cfg: .config.OptimizerConfig
    :rtype: .adapter.LowRankAdapter
    """
    eta = cfg.eta if eta is None else eta
    params = NewtonSchulzParams.from_config(cfg)
    calib, grad_u, grad_v, update_u = prepare_lowrank_step(adapter, grad_w, state, cfg, grad_scale)
    update_muon_moments(state, calib, grad_u, grad_v, cfg.mu, cfg)

    def direction(factor):
        if factor == 'u':
            momentum = grad_u + cfg.mu * state.m_u if cfg.nesterov else state.m_u
            return newton_schulz5_lowrank(momentum, adapter.v, params)
        momentum = grad_v + cfg.mu * state.m_v if cfg.nesterov else state.m_v
        return newton_schulz5_lowrank(momentum, adapter.u, params)

    return apply_lowrank_update(adapter, state, cfg, eta, direction, update_u)
