# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (problems.py) is part of loft_optim                               -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Synthetic matrix-factorization objectives ``f(W) = c * ||W - A||_F^2`` with a low-rank target ``A`` and closed-form
gradients, together with the initializers and optima used to check optimizer trajectories against theory.

Two loss conventions exist: ``half`` (``c = 1/2``, gradient ``W - A``) and ``full`` (``c = 1``, gradient
``2 (W - A)``).
"""

import numpy as np

from .lazy import Lazy, preloadable
from .linalg import as_matrix, svd, numerical_rank, ShapeMismatchException
from .util import logger, seeded_rng

LOSS_CONVENTIONS = ('half', 'full')


class InvalidTargetException(ValueError):
    """
    Raised if a target is requested with invalid dimensions or rank, or an unknown loss convention is used.
    """
    pass


@preloadable
class MatrixTarget(object):
    """
    A target matrix ``a`` of known rank. The sign-normalized SVD is computed on first access and cached.

    :param a: the target matrix
    :param true_rank: rank of ``a``, computed numerically if omitted
    :param seed: seed the target was generated from, if any
    :param preload: compute the SVD right away
    :type a: numpy.ndarray
    :type true_rank: int
    :type seed: int
    :type preload: bool
    """
    def __init__(self, a, true_rank=None, seed=None):
        self.a = as_matrix(a, 'a')
        self.true_rank = numerical_rank(self.a) if true_rank is None else int(true_rank)
        self.seed = seed

    @property
    def shape(self):
        """
        :rtype: tuple[int, int]
        """
        return self.a.shape

    @Lazy
    def svd(self):
        """
        Thin SVD of the target with the deterministic sign convention of :py:func:`.linalg.svd`.

        :rtype: .linalg.SVD
        """
        return svd(self.a)

    def leading_subspaces(self, r):
        """
        :return: the leading ``r`` left and right singular vectors as ``(m, r)`` and ``(n, r)`` matrices
        :rtype: tuple[numpy.ndarray, numpy.ndarray]
        """
        return self.svd.u[:, :r], self.svd.vh[:r].T

    def rank_r_optimum(self, r, convention='half'):
        """
        Smallest loss reachable by a rank-``r`` weight (Eckart-Young): the tail energy of the spectrum times the
        loss constant.

        :rtype: float
        """
        return _loss_constant(convention) * float(np.sum(self.svd.s[r:] ** 2))

    def __repr__(self):
        m, n = self.shape
        return 'MatrixTarget(m={}, n={}, rank={}, seed={})'.format(m, n, self.true_rank, self.seed)


def _loss_constant(convention):
    if convention not in LOSS_CONVENTIONS:
        raise InvalidTargetException('unknown loss convention {}, expected one of {}'
                                     .format(convention, ', '.join(LOSS_CONVENTIONS)))
    return 0.5 if convention == 'half' else 1.0


def gen_rank_r_target(m, n, r_a, seed):
    """
    Generate ``A = G1 @ G2.T`` from seeded standard-normal ``G1`` (m x r_a) and ``G2`` (n x r_a); ``A`` has rank
    ``r_a`` with probability one.

    :type m: int
    :type n: int
    :param r_a: target rank, ``1 <= r_a <= min(m, n)``
    :type r_a: int
    :type seed: int
    :rtype: MatrixTarget
    :raises InvalidTargetException: on invalid dimensions or rank
    """
    if m < 1 or n < 1:
        raise InvalidTargetException('target dimensions must be positive, got {}x{}'.format(m, n))
    if not 1 <= r_a <= min(m, n):
        raise InvalidTargetException('target rank must lie in [1, {}], got {}'.format(min(m, n), r_a))
    rng = seeded_rng(seed)
    g1 = rng.standard_normal((m, r_a))
    g2 = rng.standard_normal((n, r_a))
    logger.debug('Generated rank {} target of shape {}x{} from seed {}'.format(r_a, m, n, seed))
    return MatrixTarget(g1 @ g2.T, true_rank=r_a, seed=seed)


def mf_loss_grad(w, target, convention='half'):
    """
    Loss and gradient of the matrix-factorization objective.

    :param w: current weight
    :param target: the target, a :py:class:`MatrixTarget` or a plain matrix
    :param convention: ``half`` for ``1/2 ||W - A||^2`` or ``full`` for ``||W - A||^2``
    :type convention: str
    :return: ``(loss, gradient)``
    :rtype: tuple[float, numpy.ndarray]
    :raises ShapeMismatchException: if ``w`` and the target differ in shape
    """
    c = _loss_constant(convention)
    a = target.a if isinstance(target, MatrixTarget) else as_matrix(target, 'target')
    w = as_matrix(w, 'w')
    if w.shape != a.shape:
        raise ShapeMismatchException('weight shape {} does not match target shape {}'.format(w.shape, a.shape))
    residual = w - a
    return c * float(np.sum(residual * residual)), 2 * c * residual


def subspace_init(target, r, seed, x0=None, y0=None):
    """
    Factors that start inside the leading singular subspaces of the target: ``U0 = U_r X0`` and ``V0 = V_r Y0``.
    ``X0`` and ``Y0`` are seeded Gaussian ``r x r`` matrices (full rank with probability one) unless given.

    :type target: MatrixTarget
    :param r: adapter rank, at most the target rank
    :type seed: int
    :rtype: tuple[numpy.ndarray, numpy.ndarray]
    :raises InvalidTargetException: if ``r`` exceeds the target rank
    """
    if not 1 <= r <= target.true_rank:
        raise InvalidTargetException('subspace initialization needs 1 <= r <= target rank {}, got {}'
                                     .format(target.true_rank, r))
    rng = seeded_rng(seed)
    x0 = rng.standard_normal((r, r)) if x0 is None else as_matrix(x0, 'x0')
    y0 = rng.standard_normal((r, r)) if y0 is None else as_matrix(y0, 'y0')
    u_r, v_r = target.leading_subspaces(r)
    return u_r @ x0, v_r @ y0


def least_squares_factor(adapter, target, factor='u'):
    """
    Exact minimizer of ``1/2 ||W0 + U V^T - A||^2`` over one factor with the other held fixed, one half-step of
    alternating least squares. Solved with :py:func:`numpy.linalg.lstsq` (minimum-norm solution if the fixed factor
    is rank deficient).

    :type adapter: .adapter.LowRankAdapter
    :type target: MatrixTarget
    :param factor: ``u`` or ``v``, the factor to solve for
    :return: the minimizing factor
    :rtype: numpy.ndarray
    """
    residual = (target.a - adapter.w0) / adapter.scale
    if factor == 'u':
        return np.linalg.lstsq(adapter.v, residual.T, rcond=None)[0].T
    return np.linalg.lstsq(adapter.u, residual, rcond=None)[0].T
