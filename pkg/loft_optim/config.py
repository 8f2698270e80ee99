# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (config.py) is part of loft_optim                                 -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Provides :py:class:`OptimizerConfig` and the strict dictionary-to-dataclass conversion used for every section of an
experiment config file. Errors always name the offending field by its dotted path.
"""

from dataclasses import dataclass, fields, asdict
import numbers

from .util import logger


class InvalidConfigException(ValueError):
    """
    Raised if a configuration value is missing, of the wrong type, out of range or unknown. The message starts with
    the dotted path of the field, e.g. ``optimizer.beta1: must lie in [0, 1)``.
    """
    pass


def config_error(path, message):
    """
    Log and build an :py:class:`InvalidConfigException`.

    :rtype: InvalidConfigException
    """
    text = '{}: {}'.format(path, message)
    logger.error('Invalid configuration: {}'.format(text))
    return InvalidConfigException(text)


def _check_kind(path, default, value):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
        kind = 'a boolean'
    elif isinstance(default, int):
        ok = isinstance(value, numbers.Integral) and not isinstance(value, bool)
        kind = 'an integer'
    elif isinstance(default, str):
        ok = isinstance(value, str)
        kind = 'a string'
    elif default is None:
        ok = value is None or (isinstance(value, numbers.Real) and not isinstance(value, bool))
        kind = 'a number or null'
    else:
        ok = isinstance(value, numbers.Real) and not isinstance(value, bool)
        kind = 'a number'
    if not ok:
        raise config_error(path, 'must be {}, got {!r}'.format(kind, value))


def join_path(prefix, name):
    """
    :return: the dotted path of field ``name`` inside section ``prefix``
    :rtype: str
    """
    return '{}.{}'.format(prefix, name) if prefix else name


def from_dict(cls, data, prefix, sections=None):
    """
    Build a dataclass from a dictionary. Missing keys take the field defaults, unknown keys are rejected and value
    kinds are checked against the kind of the default (bool, int, float, str, optional number).

    :param cls: a dataclass whose fields all have defaults
    :param data: the parsed JSON section
    :param prefix: dotted path of the section, used in error messages
    :param sections: parsers ``(value, path) -> object`` for fields that are nested sections
    :type data: dict
    :type prefix: str
    :type sections: dict
    :raises InvalidConfigException: on unknown keys or wrong kinds
    """
    sections = sections or {}
    if not isinstance(data, dict):
        raise config_error(prefix or 'config', 'must be an object')
    known = {f.name: f for f in fields(cls)}
    for key in sorted(data):
        if key not in known:
            raise config_error(join_path(prefix, key), 'unknown field')
    values = {}
    for name, f in known.items():
        if name not in data:
            continue
        path = join_path(prefix, name)
        if name in sections:
            values[name] = sections[name](data[name], path)
        else:
            _check_kind(path, f.default, data[name])
            values[name] = data[name]
    return cls(**values)


@dataclass
class OptimizerConfig(object):
    """
    Hyperparameters shared by all steppers. ``weight_decay`` is the decoupled decay rate (lambda), ``mu`` the Muon
    momentum, ``alpha`` the LoRA baseline scale. The three flags switch the LoFT ablations; ``eps_inside_sqrt``
    selects ``sqrt(v + eps)`` instead of ``sqrt(v) + eps`` for every Adam-type stepper at once and
    ``update_u_first=False`` restores the V-first alternation order.
    """
    eta: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    mu: float = 0.95
    nesterov: bool = False
    clip_threshold: float = None
    alpha: float = 1.0
    alternating: bool = True
    first_moment_calibration: bool = True
    second_moment_calibration: bool = True
    eps_inside_sqrt: bool = False
    update_u_first: bool = True
    ns_steps: int = 5

    def validate(self, prefix='optimizer'):
        """
        :return: this config
        :rtype: OptimizerConfig
        :raises InvalidConfigException: if a value is out of range
        """
        if not self.eta > 0:
            raise config_error(prefix + '.eta', 'must be positive')
        for name in ('beta1', 'beta2', 'mu'):
            if not 0 <= getattr(self, name) < 1:
                raise config_error('{}.{}'.format(prefix, name), 'must lie in [0, 1)')
        if not self.eps > 0:
            raise config_error(prefix + '.eps', 'must be positive')
        if not self.weight_decay >= 0:
            raise config_error(prefix + '.weight_decay', 'must be non-negative')
        if self.clip_threshold is not None and not self.clip_threshold > 0:
            raise config_error(prefix + '.clip_threshold', 'must be positive or null')
        if self.alpha == 0:
            raise config_error(prefix + '.alpha', 'must be non-zero')
        if self.ns_steps < 1:
            raise config_error(prefix + '.ns_steps', 'must be at least 1')
        return self

    def to_dict(self):
        """
        :rtype: dict
        """
        return asdict(self)

    @classmethod
    def from_dict(cls, data, prefix='optimizer'):
        """
        :rtype: OptimizerConfig
        :raises InvalidConfigException: on unknown fields, wrong kinds or out-of-range values
        """
        return from_dict(cls, data, prefix).validate(prefix)
