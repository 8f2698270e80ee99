# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (checkpoint.py) is part of loft_optim                             -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
JSON checkpoints of a stepper (parameters and optimizer state) and its target.

Every matrix is stored as ``{"shape": [rows, cols], "values": [...]}`` with the values in row-major order. Python
floats serialize with their shortest round-trip representation, so restoring is bit-exact.
"""

from collections import namedtuple
import json

import numpy as np

from .adapter import LowRankAdapter
from .config import OptimizerConfig
from .linalg import ShapeMismatchException
from .problems import MatrixTarget
from .stepper import STEPPERS
from .util import logger

CHECKPOINT_VERSION = 1

Checkpoint = namedtuple('Checkpoint', ['stepper', 'target', 'name'])


def encode_matrix(matrix):
    """
    :type matrix: numpy.ndarray
    :rtype: dict
    """
    assert matrix.ndim == 2, 'only matrices can be encoded'
    return {'shape': list(matrix.shape), 'values': [float(x) for x in matrix.ravel(order='C')]}


def decode_matrix(document):
    """
    :type document: dict
    :rtype: numpy.ndarray
    :raises ShapeMismatchException: if the value count does not match the shape header
    """
    rows, cols = document['shape']
    values = np.array(document['values'], dtype=np.float64)
    if values.size != rows * cols:
        raise ShapeMismatchException('matrix header {}x{} does not match {} values'.format(rows, cols, values.size))
    return values.reshape(rows, cols)


def encode_adapter(adapter):
    """
    :type adapter: .adapter.LowRankAdapter
    :rtype: dict
    """
    return {'w0': encode_matrix(adapter.w0), 'u': encode_matrix(adapter.u), 'v': encode_matrix(adapter.v),
            'u_prev': encode_matrix(adapter.u_prev), 'v_prev': encode_matrix(adapter.v_prev),
            'scale': adapter.scale}


def decode_adapter(document):
    """
    :rtype: .adapter.LowRankAdapter
    """
    return LowRankAdapter(decode_matrix(document['w0']), decode_matrix(document['u']), decode_matrix(document['v']),
                          scale=document['scale'], u_prev=decode_matrix(document['u_prev']),
                          v_prev=decode_matrix(document['v_prev']))


def encode_state(state):
    """
    :type state: .loft_state.OptimizerState
    :rtype: dict
    """
    document = {'step': state.step, 'grad_norm': state.grad_norm, 'clamps': state.clamps,
                'buffers': {name: encode_matrix(buffer) for name, buffer in sorted(state.buffers().items())}}
    if hasattr(state, 'update_u_next'):
        document['update_u_next'] = state.update_u_next
    return document


def restore_state(state, document):
    """
    Load an encoded state into a freshly constructed state of the same kind.

    :type state: .loft_state.OptimizerState
    :type document: dict
    """
    state.step = document['step']
    state.grad_norm = document['grad_norm']
    state.clamps = document['clamps']
    if 'update_u_next' in document:
        state.update_u_next = document['update_u_next']
    state.load_buffers({name: decode_matrix(buffer) for name, buffer in document['buffers'].items()})


def encode_target(target):
    """
    :type target: .problems.MatrixTarget
    :rtype: dict
    """
    return {'a': encode_matrix(target.a), 'true_rank': target.true_rank, 'seed': target.seed}


def decode_target(document):
    """
    :rtype: .problems.MatrixTarget
    """
    return MatrixTarget(decode_matrix(document['a']), true_rank=document['true_rank'], seed=document['seed'])


def save_checkpoint(path, stepper, target, name=None):
    """
    Write a checkpoint file.

    :param path: file to write
    :type stepper: .stepper.Stepper
    :type target: .problems.MatrixTarget
    :param name: run name stored alongside
    :type path: str
    """
    document = {'version': CHECKPOINT_VERSION, 'name': name, 'method': stepper.method,
                'optimizer': stepper.cfg.to_dict(), 'state': encode_state(stepper.state),
                'target': encode_target(target)}
    if stepper.dense:
        document['weight'] = encode_matrix(stepper.w)
    else:
        document['adapter'] = encode_adapter(stepper.adapter)
    with open(path, 'w') as f:
        json.dump(document, f)
    logger.info('Wrote checkpoint {}'.format(path))


def load_checkpoint(path):
    """
    Restore a stepper and its target from a checkpoint file.

    :type path: str
    :rtype: Checkpoint
    """
    with open(path, 'r') as f:
        document = json.load(f)
    assert document.get('version') == CHECKPOINT_VERSION, \
        'unsupported checkpoint version {}'.format(document.get('version'))
    cls = STEPPERS[document['method']]
    cfg = OptimizerConfig.from_dict(document['optimizer'])
    if cls.dense:
        stepper = cls(decode_matrix(document['weight']), cfg)
    else:
        adapter = decode_adapter(document['adapter'])
        scale = adapter.scale
        stepper = cls(adapter, cfg)
        adapter.scale = scale
    restore_state(stepper.state, document['state'])
    logger.debug('Loaded checkpoint {} ({} at step {})'.format(path, stepper.method, stepper.step_count))
    return Checkpoint(stepper, decode_target(document['target']), document['name'])
