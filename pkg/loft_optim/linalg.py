# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (linalg.py) is part of loft_optim                                 -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Dense matrix kernels shared by all other modules: structured products (Kronecker, Khatri-Rao, face-splitting), a
sign-normalized SVD, Gram-matrix inverses with pseudo-inverse fallback and projectors onto column spaces.

Matrices are plain :class:`numpy.ndarray` objects of dtype float64 with exactly two dimensions. Every public function
validates its inputs with :py:func:`as_matrix` and never mutates them.
"""

from collections import namedtuple

import numpy as np

EPS = np.finfo(np.float64).eps

SVD = namedtuple('SVD', ['u', 's', 'vh'])
GramInverse = namedtuple('GramInverse', ['inverse', 'rank'])


class ShapeMismatchException(ValueError):
    """
    Raised if the shapes of matrices passed to an operation are not conformable.
    """
    pass


class NonFiniteException(ValueError):
    """
    Raised if a matrix entering a public operation contains NaN or Inf.
    """
    pass


def as_matrix(value, name='matrix'):
    """
    Validate and convert a value to a finite float64 matrix.

    :param value: anything :func:`numpy.asarray` accepts, with exactly two dimensions
    :param name: used in error messages
    :type name: str
    :return: the value as a 2-D float64 array (no copy if it already is one)
    :rtype: numpy.ndarray
    :raises ShapeMismatchException: if the value is not two-dimensional or has an empty dimension
    :raises NonFiniteException: if any entry is NaN or Inf
    """
    matrix = np.asarray(value, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise ShapeMismatchException('{name} must be a non-empty 2-D matrix, got shape {shape}'
                                     .format(name=name, shape=matrix.shape))
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteException('{name} contains non-finite entries'.format(name=name))
    return matrix


def kron(a, b):
    """
    Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``.

    :type a: numpy.ndarray
    :type b: numpy.ndarray
    :return: matrix of shape ``(p*s, q*t)`` for ``a`` of shape ``(p, q)`` and ``b`` of shape ``(s, t)``
    :rtype: numpy.ndarray
    """
    return np.kron(as_matrix(a, 'a'), as_matrix(b, 'b'))


def khatri_rao_cols(a, b):
    """
    Column-wise Khatri-Rao product: column ``j`` of the result is ``kron(a[:, j], b[:, j])``.

    :param a: matrix of shape ``(p, r)``
    :param b: matrix of shape ``(q, r)``
    :return: matrix of shape ``(p*q, r)``
    :rtype: numpy.ndarray
    :raises ShapeMismatchException: if the column counts differ
    """
    a, b = as_matrix(a, 'a'), as_matrix(b, 'b')
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatchException('khatri_rao_cols needs equal column counts, got {} and {}'
                                     .format(a.shape[1], b.shape[1]))
    return np.einsum('ir,jr->ijr', a, b).reshape(a.shape[0] * b.shape[0], a.shape[1])


def face_split_rows(a, b):
    """
    Face-splitting (transposed Khatri-Rao) product: row ``i`` of the result is ``kron(a[i], b[i])``, so column
    ``x * s + y`` holds ``a[:, x] * b[:, y]``.

    :param a: matrix of shape ``(p, r)``
    :param b: matrix of shape ``(p, s)``
    :return: matrix of shape ``(p, r*s)``
    :rtype: numpy.ndarray
    :raises ShapeMismatchException: if the row counts differ
    """
    a, b = as_matrix(a, 'a'), as_matrix(b, 'b')
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatchException('face_split_rows needs equal row counts, got {} and {}'
                                     .format(a.shape[0], b.shape[0]))
    return np.einsum('pi,pj->pij', a, b).reshape(a.shape[0], a.shape[1] * b.shape[1])


def svd(matrix):
    """
    Thin SVD with a deterministic sign convention: the largest-magnitude entry of every left singular vector is
    positive (the matching right singular vector is flipped with it).

    :type matrix: numpy.ndarray
    :return: ``(u, s, vh)`` with ``matrix = u @ diag(s) @ vh``
    :rtype: SVD
    """
    matrix = as_matrix(matrix)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    pivots = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivots, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return SVD(u * signs, s, vh * signs[:, np.newaxis])


def rank_cutoff(singular_values, shape):
    """
    Numerical-rank threshold ``max(shape) * eps * sigma_max``.

    :rtype: float
    """
    if len(singular_values) == 0:
        return 0.0
    return max(shape) * EPS * float(np.max(singular_values))


def numerical_rank(matrix):
    """
    :return: the number of singular values above :py:func:`rank_cutoff`
    :rtype: int
    """
    matrix = as_matrix(matrix)
    s = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s > rank_cutoff(s, matrix.shape)))


def gram_inverse(matrix):
    """
    Compute ``(M^T M)^{-1}`` for ``M`` of shape ``(p, r)`` from the SVD of ``M``, so that the condition number is
    never squared. If ``M`` does not have full column rank the Moore-Penrose pseudo-inverse of ``M^T M`` is returned
    instead, using the cutoff of :py:func:`rank_cutoff` on the singular values of ``M``.

    :type matrix: numpy.ndarray
    :return: the symmetric ``(r, r)`` inverse and the effective rank of ``M``
    :rtype: GramInverse
    """
    matrix = as_matrix(matrix)
    _, s, vh = np.linalg.svd(matrix, full_matrices=False)
    keep = s > rank_cutoff(s, matrix.shape)
    basis = vh[keep].T
    inverse = (basis / s[keep] ** 2) @ basis.T
    rank = int(np.sum(keep))
    return GramInverse((inverse + inverse.T) / 2, rank)


def projector(matrix):
    """
    Orthogonal projector ``M (M^T M)^{-1} M^T`` onto the column space of ``M``.

    :param matrix: matrix of shape ``(p, r)``
    :return: symmetric idempotent matrix of shape ``(p, p)``
    :rtype: numpy.ndarray
    """
    matrix = as_matrix(matrix)
    return matrix @ gram_inverse(matrix).inverse @ matrix.T


def lowrank_fro_norm(u, v):
    """
    Frobenius norm of ``u @ v.T`` computed as ``sqrt(tr((u^T u)(v^T v)))`` without forming the product.

    :param u: matrix of shape ``(m, r)``
    :param v: matrix of shape ``(n, r)``
    :rtype: float
    :raises ShapeMismatchException: if the factors have different ranks
    """
    u, v = as_matrix(u, 'u'), as_matrix(v, 'v')
    if u.shape[1] != v.shape[1]:
        raise ShapeMismatchException('factors have ranks {} and {}'.format(u.shape[1], v.shape[1]))
    # both Gram matrices are symmetric, so the trace of their product is the sum of the elementwise product
    return float(np.sqrt(max(np.sum((u.T @ u) * (v.T @ v)), 0.0)))
