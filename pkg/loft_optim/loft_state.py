# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (loft_state.py) is part of loft_optim                             -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Optimizer-state calibration for low-rank adapters.

When a factor moves between two steps the moments accumulated in the old coordinates no longer describe the same
full-space quantities. The calibration matrices ``C^V = (V_prev^T V)(V^T V)^{-1}`` (and ``C^U`` likewise) transport
first moments (``m_u @ C^V``) and second-moment cross terms (``p_u @ kron(C^V, C^V)``) so that the reconstructions
``m_u @ V^T`` and ``p_u @ khatri_rao_cols(V^T, V^T)`` equal the exponential averages of the sequentially projected
full gradients and of their elementwise squares.

The cross-term buffers have shape ``(m, r*r)`` and ``(n, r*r)``; column ``a*r + b`` belongs to the factor column
pair ``(a, b)``, the ordering produced by :py:func:`.linalg.face_split_rows` and :py:func:`.linalg.kron`.
"""

from collections import namedtuple

import numpy as np

from .linalg import as_matrix, gram_inverse, kron, khatri_rao_cols, face_split_rows, ShapeMismatchException
from .util import logger

CalibrationPair = namedtuple('CalibrationPair', ['cv', 'cu'])


class OptimizerState(object):
    """
    Step counter shared by every optimizer state. ``grad_norm`` holds the effective gradient norm of the last step
    (before clipping) and ``clamps`` counts clamped second-moment entries.
    """
    def __init__(self):
        self.step = 0
        self.grad_norm = 0.0
        self.clamps = 0

    def state_size(self):
        """
        :return: number of floats held by the state buffers
        :rtype: int
        """
        return sum(buffer.size for buffer in self.buffers().values())

    def buffers(self):
        """
        :return: the named matrix buffers of this state
        :rtype: dict[str, numpy.ndarray]
        """
        return {}

    def load_buffers(self, buffers):
        """
        Replace the buffers with the given matrices, e.g. from a checkpoint.

        :type buffers: dict[str, numpy.ndarray]
        :raises ShapeMismatchException: if a name is unknown or a shape differs
        """
        current = self.buffers()
        if set(buffers) != set(current):
            raise ShapeMismatchException('state buffers {} do not match {}'
                                         .format(sorted(buffers), sorted(current)))
        for name, value in buffers.items():
            if value.shape != current[name].shape:
                raise ShapeMismatchException('buffer {} has shape {}, expected {}'
                                             .format(name, value.shape, current[name].shape))
            setattr(self, name, value)


class AlternatingState(OptimizerState):
    """
    Adds the alternation flag of low-rank optimizers.

    :param update_u_first: whether the first step updates ``U``
    :type update_u_first: bool
    """
    def __init__(self, update_u_first=True):
        OptimizerState.__init__(self)
        self.update_u_next = bool(update_u_first)


class LoftAdamState(AlternatingState):
    """
    First moments ``m_u`` (m x r), ``m_v`` (n x r) and cross-term accumulators ``p_u`` (m x r^2), ``p_v`` (n x r^2),
    all zero at step 0.
    """
    def __init__(self, m, n, r, update_u_first=True):
        AlternatingState.__init__(self, update_u_first)
        self.m_u = np.zeros((m, r))
        self.m_v = np.zeros((n, r))
        self.p_u = np.zeros((m, r * r))
        self.p_v = np.zeros((n, r * r))

    def buffers(self):
        return {'m_u': self.m_u, 'm_v': self.m_v, 'p_u': self.p_u, 'p_v': self.p_v}


def calibration_matrices(adapter):
    """
    ``C^V = (V_prev^T V)(V^T V)^{-1}`` and ``C^U = (U_prev^T U)(U^T U)^{-1}``, with the pseudo-inverse for
    rank-deficient factors. An unchanged full-rank factor yields the identity.

    :type adapter: .adapter.LowRankAdapter
    :rtype: CalibrationPair
    """
    cv = (adapter.v_prev.T @ adapter.v) @ gram_inverse(adapter.v).inverse
    cu = (adapter.u_prev.T @ adapter.u) @ gram_inverse(adapter.u).inverse
    return CalibrationPair(cv, cu)


def identity_calibration(r):
    """
    :rtype: CalibrationPair
    """
    return CalibrationPair(np.eye(r), np.eye(r))


def update_first_moments(state, calib, grad_u, grad_v, beta1, flags):
    """
    ``m_u <- beta1 * m_u @ C^V + (1 - beta1) * grad_u`` and the mirrored update of ``m_v``. Both moments are updated
    on every step, whichever factor is stepped. With ``flags.first_moment_calibration`` off the calibration matrices
    are replaced by the identity.

    :param grad_u: scaled gradient of ``U``
    :param grad_v: scaled gradient of ``V``
    :param flags: any object with a ``first_moment_calibration`` attribute, usually an OptimizerConfig
    :type state: LoftAdamState
    :type calib: CalibrationPair
    :type beta1: float
    """
    if not flags.first_moment_calibration:
        calib = identity_calibration(state.m_u.shape[1])
    state.m_u = beta1 * (state.m_u @ calib.cv) + (1 - beta1) * grad_u
    state.m_v = beta1 * (state.m_v @ calib.cu) + (1 - beta1) * grad_v


def update_cross_terms(state, calib, grad_u, grad_v, beta2, flags):
    """
    ``p_u <- beta2 * p_u @ kron(C^V, C^V) + (1 - beta2) * face_split_rows(grad_u, grad_u)`` and mirrored for
    ``p_v``. With ``flags.second_moment_calibration`` off the Kronecker factor is the identity.

    :type state: LoftAdamState
    :type calib: CalibrationPair
    :type beta2: float
    """
    if state.p_u.shape[1] != state.m_u.shape[1] ** 2:
        raise ShapeMismatchException('cross-term buffer must have r^2 columns')
    if flags.second_moment_calibration:
        state.p_u = beta2 * (state.p_u @ kron(calib.cv, calib.cv))
        state.p_v = beta2 * (state.p_v @ kron(calib.cu, calib.cu))
    else:
        state.p_u = beta2 * state.p_u
        state.p_v = beta2 * state.p_v
    state.p_u += (1 - beta2) * face_split_rows(grad_u, grad_u)
    state.p_v += (1 - beta2) * face_split_rows(grad_v, grad_v)


def reconstruct_first_moment(m_u, v):
    """
    :param m_u: first moment of shape ``(m, r)``
    :param v: the other factor, shape ``(n, r)``
    :return: the full-space first moment ``m_u @ v.T``
    :rtype: numpy.ndarray
    """
    m_u, v = as_matrix(m_u, 'm_u'), as_matrix(v, 'v')
    if m_u.shape[1] != v.shape[1]:
        raise ShapeMismatchException('moment rank {} does not match factor rank {}'.format(m_u.shape[1], v.shape[1]))
    return m_u @ v.T


def reconstruct_second_moment(p_u, v):
    """
    Full-space second moment ``p_u @ khatri_rao_cols(v.T, v.T)``: entry ``(i, j)`` is
    ``sum_{a,b} p_u[i, a*r + b] * v[j, a] * v[j, b]``.

    :param p_u: cross terms of shape ``(m, r*r)``
    :param v: the other factor, shape ``(n, r)``
    :rtype: numpy.ndarray
    """
    p_u, v = as_matrix(p_u, 'p_u'), as_matrix(v, 'v')
    if p_u.shape[1] != v.shape[1] ** 2:
        raise ShapeMismatchException('cross terms have {} columns, expected r^2 = {}'
                                     .format(p_u.shape[1], v.shape[1] ** 2))
    return p_u @ khatri_rao_cols(v.T, v.T)


def clamp_second_moment(v_tilde):
    """
    Clamp negative entries of a reconstructed second moment to zero. Calibration with quickly rotating subspaces can
    leave tiny negative values from cancellation.

    :return: the clamped matrix and the number of clamped entries
    :rtype: tuple[numpy.ndarray, int]
    """
    negative = v_tilde < 0
    count = int(np.count_nonzero(negative))
    if count:
        logger.debug('Clamped {} negative second-moment entries (min {:.3e})'.format(count, float(v_tilde.min())))
        v_tilde = np.where(negative, 0.0, v_tilde)
    return v_tilde, count
