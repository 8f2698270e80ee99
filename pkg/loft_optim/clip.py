# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (clip.py) is part of loft_optim                                   -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Global-norm gradient clipping that sees the same norm full fine-tuning would see. For a low-rank layer stepping
``U`` the effective gradient is ``scaled_grad_u @ V^T = grad_w @ P_V``; its norm is evaluated from ``r x r`` Gram
matrices without forming the ``m x n`` product.
"""

from collections import namedtuple

import numpy as np

LayerGradView = namedtuple('LayerGradView', ['active_grad', 'inactive_factor'])
LayerGradView.__doc__ = """
Effective gradient of one layer, ``active_grad @ inactive_factor.T``. An ``inactive_factor`` of ``None`` marks a
dense layer whose ``active_grad`` already is the full gradient.
"""

TINY = np.finfo(np.float64).tiny


def lowrank_view(scaled, adapter, update_u):
    """
    :param scaled: scaled gradients of the layer
    :param update_u: whether ``U`` is the factor being stepped
    :type scaled: .adapter.ScaledGrads
    :type adapter: .adapter.LowRankAdapter
    :rtype: LayerGradView
    """
    if update_u:
        return LayerGradView(scaled.u, adapter.v)
    return LayerGradView(scaled.v, adapter.u)


def _squared_norm(view):
    grad = view.active_grad
    if view.inactive_factor is None:
        return float(np.sum(grad * grad))
    factor = view.inactive_factor
    # ||G F^T||_F^2 = tr((G^T G)(F^T F))
    return max(float(np.sum((grad.T @ grad) * (factor.T @ factor))), 0.0)


def effective_global_norm(layers):
    """
    :param layers: gradient views of all layers taking part in clipping
    :type layers: list[LayerGradView]
    :return: ``sqrt(sum of squared effective-gradient norms)``
    :rtype: float
    """
    return float(np.sqrt(sum(_squared_norm(view) for view in layers)))


def clip_scale(norm, threshold):
    """
    :param norm: global effective-gradient norm
    :param threshold: clipping threshold, ``None`` disables clipping
    :type norm: float
    :type threshold: float or None
    :return: ``min(1, threshold / norm)``, the factor every layer's scaled gradient is multiplied with
    :rtype: float
    """
    if threshold is None:
        return 1.0
    return min(1.0, threshold / max(norm, TINY))
