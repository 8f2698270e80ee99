# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (adapter.py) is part of loft_optim                                -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Provides the low-rank parameterization ``W = W0 + U V^T`` of a single linear map, its initialization, the chain rule
from the full gradient to the factor gradients and the scale-invariant (scaled) factor gradients.
"""

from collections import namedtuple

import numpy as np

from .linalg import as_matrix, gram_inverse, ShapeMismatchException
from .util import logger, seeded_rng

ScaledGrads = namedtuple('ScaledGrads', ['u', 'v', 'rank_u', 'rank_v'])

INIT_MODES = ('lora', 'gaussian', 'subspace')


class InvalidAdapterException(ValueError):
    """
    Raised if an adapter is requested with invalid dimensions or an unknown initialization mode.
    """
    pass


class LowRankAdapter(object):
    """
    Frozen base weight ``w0`` (m x n) plus trainable factors ``u`` (m x r) and ``v`` (n x r).

    ``u_prev`` and ``v_prev`` hold the factors of exactly one optimizer step earlier; before the first step they equal
    the current factors. Optimizers call :py:meth:`snapshot` once per step after computing the calibration matrices
    and before changing any factor.

    :param w0: frozen base weight
    :param u: left factor
    :param v: right factor
    :param scale: multiplier of ``u @ v.T`` in the effective weight, only the LoRA baseline uses values other than 1
    :type w0: numpy.ndarray
    :type u: numpy.ndarray
    :type v: numpy.ndarray
    :type scale: float
    """
    def __init__(self, w0, u, v, scale=1.0, u_prev=None, v_prev=None):
        self.w0 = as_matrix(w0, 'w0')
        self.u = as_matrix(u, 'u').copy()
        self.v = as_matrix(v, 'v').copy()
        self.scale = float(scale)
        if self.u.shape[0] != self.w0.shape[0] or self.v.shape[0] != self.w0.shape[1] \
                or self.u.shape[1] != self.v.shape[1]:
            raise ShapeMismatchException('factors {} and {} do not match base weight {}'
                                         .format(self.u.shape, self.v.shape, self.w0.shape))
        self.u_prev = self.u.copy() if u_prev is None else as_matrix(u_prev, 'u_prev').copy()
        self.v_prev = self.v.copy() if v_prev is None else as_matrix(v_prev, 'v_prev').copy()
        if self.u_prev.shape != self.u.shape or self.v_prev.shape != self.v.shape:
            raise ShapeMismatchException('previous iterates must have the shapes of the current factors')

    @property
    def rank(self):
        """
        :return: the adapter rank r
        :rtype: int
        """
        return self.u.shape[1]

    @property
    def shape(self):
        """
        :return: shape ``(m, n)`` of the adapted weight
        :rtype: tuple[int, int]
        """
        return self.w0.shape

    def effective_weight(self):
        """
        :return: the dense weight ``w0 + scale * u @ v.T``
        :rtype: numpy.ndarray
        """
        return effective_weight(self)

    def snapshot(self):
        """
        Store the current factors as the previous iterates.
        """
        self.u_prev = self.u.copy()
        self.v_prev = self.v.copy()

    def copy(self):
        """
        :return: an independent deep copy
        :rtype: LowRankAdapter
        """
        return LowRankAdapter(self.w0.copy(), self.u, self.v, self.scale, self.u_prev, self.v_prev)

    def state_size(self):
        """
        :return: number of floats stored besides the frozen base (factors and previous iterates)
        :rtype: int
        """
        return 2 * (self.u.size + self.v.size)

    def __repr__(self):
        m, n = self.shape
        return 'LowRankAdapter(m={}, n={}, r={}, scale={})'.format(m, n, self.rank, self.scale)


def init_adapter(m, n, r, seed, w0=None, init='lora', target=None, scale=1.0):
    """
    Create an adapter.

    ``lora`` (default): ``v`` has i.i.d. Gaussian entries scaled by ``1/sqrt(r)`` and ``u = 0``, so the effective
    weight equals ``w0`` exactly. ``gaussian``: ``v`` as before and ``u`` Gaussian as well, both factors have full
    column rank with probability one. ``subspace``: factors from :py:func:`.problems.subspace_init` on ``target``.

    :param m: rows of the weight
    :param n: columns of the weight
    :param r: rank, values above ``min(m, n)`` are allowed
    :param seed: seed of the factor initialization
    :param w0: frozen base weight, zeros if omitted
    :param init: one of ``lora``, ``gaussian``, ``subspace``
    :param target: :py:class:`.problems.MatrixTarget`, required for ``subspace``
    :type m: int
    :type n: int
    :type r: int
    :type seed: int
    :type init: str
    :rtype: LowRankAdapter
    :raises InvalidAdapterException: on non-positive dimensions or unknown modes
    """
    for name, value in (('m', m), ('n', n), ('r', r)):
        if int(value) != value or value < 1:
            raise InvalidAdapterException('{} must be a positive integer, got {}'.format(name, value))
    if init not in INIT_MODES:
        raise InvalidAdapterException('unknown init mode {}, expected one of {}'.format(init, ', '.join(INIT_MODES)))
    w0 = np.zeros((m, n)) if w0 is None else as_matrix(w0, 'w0')
    if w0.shape != (m, n):
        raise ShapeMismatchException('w0 has shape {}, expected {}'.format(w0.shape, (m, n)))

    if init == 'subspace':
        from .problems import subspace_init
        if target is None:
            raise InvalidAdapterException('subspace initialization needs a target')
        u, v = subspace_init(target, r, seed)
    else:
        rng = seeded_rng(seed)
        v = rng.standard_normal((n, r)) / np.sqrt(r)
        u = rng.standard_normal((m, r)) / np.sqrt(r) if init == 'gaussian' else np.zeros((m, r))
    logger.debug('Initialized {} adapter m={} n={} r={} seed={}'.format(init, m, n, r, seed))
    return LowRankAdapter(w0, u, v, scale=scale)


def effective_weight(adapter):
    """
    :return: ``W = W0 + scale * U V^T``
    :rtype: numpy.ndarray
    """
    return adapter.w0 + adapter.scale * (adapter.u @ adapter.v.T)


def factor_grads(grad_w, adapter):
    """
    Chain rule from the gradient with respect to the effective weight to the factor gradients:
    ``grad_u = grad_w @ v`` and ``grad_v = grad_w.T @ u`` (times the adapter scale).

    :param grad_w: gradient of shape ``(m, n)``
    :type adapter: LowRankAdapter
    :return: ``(grad_u, grad_v)`` of shapes ``(m, r)`` and ``(n, r)``
    :rtype: tuple[numpy.ndarray, numpy.ndarray]
    :raises ShapeMismatchException: if the gradient does not have the weight's shape
    """
    grad_w = as_matrix(grad_w, 'grad_w')
    if grad_w.shape != adapter.shape:
        raise ShapeMismatchException('gradient shape {} does not match weight shape {}'
                                     .format(grad_w.shape, adapter.shape))
    return adapter.scale * (grad_w @ adapter.v), adapter.scale * (grad_w.T @ adapter.u)


def scaled_grads(grad_u, grad_v, adapter):
    """
    Scale-invariant factor gradients ``grad_u (V^T V)^{-1}`` and ``grad_v (U^T U)^{-1}``. The product
    ``scaled.u @ v.T`` equals ``grad_w @ P_V``, the gradient projected onto the row space spanned by ``v``.
    Rank-deficient factors fall back to the pseudo-inverse; the effective ranks are returned.

    :type adapter: LowRankAdapter
    :rtype: ScaledGrads
    """
    gram_v = gram_inverse(adapter.v)
    gram_u = gram_inverse(adapter.u)
    if gram_v.rank < adapter.rank or gram_u.rank < adapter.rank:
        logger.debug('Pseudo-inverse fallback: rank(U)={}, rank(V)={}, r={}'
                     .format(gram_u.rank, gram_v.rank, adapter.rank))
    return ScaledGrads(as_matrix(grad_u, 'grad_u') @ gram_v.inverse,
                       as_matrix(grad_v, 'grad_v') @ gram_u.inverse,
                       gram_u.rank, gram_v.rank)
