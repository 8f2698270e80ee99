# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (util.py) is part of loft_optim                                   -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Provides internal utility functions
"""

import logging
import sys
from functools import wraps

import numpy as np


def get_logger():
    """
    Get the package logger and apply the default settings.

    :return: the logger
    :rtype: logging.Logger
    """
    lgr = logging.getLogger('loft_optim')
    lgr.setLevel(logging.INFO)
    if not lgr.handlers:
        fmt = logging.Formatter(fmt='%(asctime)s [%(name)s.%(module)s]:%(levelname)s: %(message)s',
                                datefmt='%I:%M:%S')
        stdout_handler = logging.StreamHandler(sys.stdout)
        stdout_handler.setLevel(logging.NOTSET)
        stdout_handler.setFormatter(fmt)
        lgr.addHandler(stdout_handler)
    return lgr


logger = get_logger()


def seeded_rng(seed):
    """
    All randomness in the package goes through this function, wall-clock entropy is never used.

    :param seed: a non-negative integer seed
    :type seed: int
    :rtype: numpy.random.Generator
    """
    assert seed is not None, 'a seed is required for reproducible runs'
    return np.random.default_rng(int(seed))


class DocInherit(object):
    """
    Method descriptor that re-uses the docstring of the overridden method of a parent class.

    Concrete steppers override ``step`` and friends of :py:class:`.stepper.Stepper` and keep the documentation in
    one place this way. The class itself is used as a decorator.
    """

    def __init__(self, method):
        self.method = method
        self.name = method.__name__

    def __get__(self, obj, cls):
        source = next((getattr(parent, self.name, None) for parent in cls.__mro__[1:]
                       if getattr(parent, self.name, None) is not None), None)
        if source is None:
            raise NameError('Can\'t find {name} in parents'.format(name=self.name))

        if obj is None:
            @wraps(self.method, assigned=('__name__', '__module__'))
            def _func(*args, **kwargs):
                return self.method(*args, **kwargs)
        else:
            @wraps(self.method, assigned=('__name__', '__module__'))
            def _func(*args, **kwargs):
                return self.method(obj, *args, **kwargs)

        _func.__doc__ = source.__doc__
        return _func


doc_inherit = DocInherit
