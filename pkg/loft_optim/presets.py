# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (presets.py) is part of loft_optim                                -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Experiment configs shipped with the package (``loft_optim/presets/*.json``).
"""

import json
import os

from .util import logger

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')


class UnknownPresetException(KeyError):
    """
    Raised if no preset of the requested name exists.
    """
    pass


def list_presets():
    """
    :return: names of all shipped presets
    :rtype: list[str]
    """
    return sorted(os.path.splitext(name)[0] for name in os.listdir(PRESET_DIR) if name.endswith('.json'))


def preset_path(name):
    """
    :type name: str
    :return: path of the preset's config file
    :rtype: str
    :raises UnknownPresetException: if the preset does not exist
    """
    if name not in list_presets():
        logger.warning('Unknown preset {}, available: {}'.format(name, ', '.join(list_presets())))
        raise UnknownPresetException(name)
    return os.path.join(PRESET_DIR, name + '.json')


def load_preset(name):
    """
    :type name: str
    :return: the parsed config document, ready for :py:func:`.harness.resolve_config`
    :rtype: dict
    """
    with open(preset_path(name), 'r') as f:
        return json.load(f)


def emit_preset(name):
    """
    :type name: str
    :return: the preset's config file as text
    :rtype: str
    """
    with open(preset_path(name), 'r') as f:
        return f.read()
