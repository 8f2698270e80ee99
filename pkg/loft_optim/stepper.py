# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (stepper.py) is part of loft_optim                                -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Provides the abstract `Stepper` and one concrete class per optimizer id. A stepper owns the parameters (a dense
weight or a low-rank adapter), the optimizer state and the config, so the harness can drive every method through
the same three calls: :py:meth:`Stepper.weight`, :py:meth:`Stepper.step` and :py:meth:`Stepper.state_size`.
"""

import abc
from dataclasses import replace

from .loft_state import AlternatingState, LoftAdamState
from .optim_adamw import (FullAdamState, FullMomentumState, LoraAdamState, LoftMomentumState, adamw_full_step,
                          gd_momentum_full_step, lora_adamw_step, loft_gd_step, loft_gd_momentum_step,
                          loft_adamw_step)
from .optim_muon import FullMuonState, LoftMuonState, muon_full_step, loft_muon_step
from .util import logger, doc_inherit


class UnknownMethodException(KeyError):
    """
    Raised if a stepper is requested for an optimizer id that is neither a method nor an alias.
    """
    pass


class Stepper(abc.ABC):
    """
    Binds a method to its parameters and its state. Subclasses provide ``method`` (the optimizer id) and implement
    :py:meth:`weight`, :py:meth:`step` and :py:meth:`new_state`.

    :param cfg: validated optimizer config
    :type cfg: .config.OptimizerConfig
    """
    method = None
    dense = True

    def __init__(self, cfg):
        self.cfg = cfg
        self.state = None

    @abc.abstractmethod
    def weight(self):
        """
        :return: the current dense weight seen by the loss
        :rtype: numpy.ndarray
        """
        pass

    @abc.abstractmethod
    def step(self, grad_w, eta=None, grad_scale=None):
        """
        Advance the optimizer by one step.

        :param grad_w: gradient of the loss with respect to :py:meth:`weight`
        :param eta: step size of this step, ``cfg.eta`` if omitted
        :param grad_scale: clipping factor for multi-layer clipping, the stepper clips on its own if omitted
        :type grad_w: numpy.ndarray
        :type eta: float
        :type grad_scale: float
        """
        pass

    @abc.abstractmethod
    def new_state(self):
        """
        :return: a zero-initialized optimizer state matching the parameters
        :rtype: .loft_state.OptimizerState
        """
        pass

    def state_size(self):
        """
        :return: number of floats of optimizer memory
        :rtype: int
        """
        return self.state.state_size()

    @property
    def step_count(self):
        """
        :rtype: int
        """
        return self.state.step

    def __repr__(self):
        return '{}(method={}, step={})'.format(type(self).__name__, self.method, self.step_count)


class DenseStepper(Stepper):
    """
    Full-parameter reference optimizer on the dense weight ``w``.

    :param w: initial weight, copied
    :type w: numpy.ndarray
    """
    step_function = None

    def __init__(self, w, cfg):
        Stepper.__init__(self, cfg)
        self.w = w.copy()
        self.state = self.new_state()

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def weight(self):
        return self.w

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def step(self, grad_w, eta=None, grad_scale=None):
        self.w = type(self).step_function(self.w, grad_w, self.state, self.cfg, eta, grad_scale)


class AdapterStepper(Stepper):
    """
    Optimizer on the factors of a :py:class:`.adapter.LowRankAdapter`. The adapter is updated in place.

    :type adapter: .adapter.LowRankAdapter
    """
    dense = False
    step_function = None
    stores_previous_iterates = True

    def __init__(self, adapter, cfg):
        Stepper.__init__(self, cfg)
        self.adapter = adapter
        self.state = self.new_state()

    def _dims(self):
        m, n = self.adapter.shape
        return m, n, self.adapter.rank

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def weight(self):
        return self.adapter.effective_weight()

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def step(self, grad_w, eta=None, grad_scale=None):
        type(self).step_function(self.adapter, grad_w, self.state, self.cfg, eta, grad_scale)

    def state_size(self):
        """
        :return: number of floats of optimizer memory, the previous factor iterates included where the method reads
                 them
        :rtype: int
        """
        size = self.state.state_size()
        if self.stores_previous_iterates:
            size += self.adapter.u_prev.size + self.adapter.v_prev.size
        return size


class FullAdamWStepper(DenseStepper):
    method = 'full_adamw'
    step_function = adamw_full_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return FullAdamState(self.w.shape)


class FullGDMomentumStepper(DenseStepper):
    method = 'full_gd_momentum'
    step_function = gd_momentum_full_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return FullMomentumState(self.w.shape)


class FullMuonStepper(DenseStepper):
    method = 'full_muon'
    step_function = muon_full_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return FullMuonState(self.w.shape)


class LoraAdamWStepper(AdapterStepper):
    """
    The LoRA baseline scales the adapter product by ``cfg.alpha``; the scale is installed on the adapter.
    """
    method = 'lora_adamw'
    step_function = lora_adamw_step
    stores_previous_iterates = False

    def __init__(self, adapter, cfg):
        adapter.scale = float(cfg.alpha)
        AdapterStepper.__init__(self, adapter, cfg)

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return LoraAdamState(*self._dims())


class LoftGDStepper(AdapterStepper):
    method = 'loft_gd'
    step_function = loft_gd_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return AlternatingState(self.cfg.update_u_first)


class LoftGDMomentumStepper(AdapterStepper):
    method = 'loft_gd_momentum'
    step_function = loft_gd_momentum_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return LoftMomentumState(*self._dims(), update_u_first=self.cfg.update_u_first)


class LoftAdamWStepper(AdapterStepper):
    method = 'loft_adamw'
    step_function = loft_adamw_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return LoftAdamState(*self._dims(), update_u_first=self.cfg.update_u_first)


class LoftMuonStepper(AdapterStepper):
    method = 'loft_muon'
    step_function = loft_muon_step

    # noinspection PyMissingOrEmptyDocstring
    @doc_inherit
    def new_state(self):
        return LoftMuonState(*self._dims(), update_u_first=self.cfg.update_u_first)


STEPPERS = {cls.method: cls for cls in (FullAdamWStepper, FullGDMomentumStepper, FullMuonStepper, LoraAdamWStepper,
                                        LoftGDStepper, LoftGDMomentumStepper, LoftAdamWStepper, LoftMuonStepper)}

# alias -> (method, forced optimizer fields)
METHOD_ALIASES = {
    'loft_adamw_simple': ('loft_adamw', {'second_moment_calibration': False}),
}

METHODS = tuple(sorted(STEPPERS)) + tuple(sorted(METHOD_ALIASES))


def resolve_method(method, cfg):
    """
    Map an optimizer id or alias to the stepper class and the config it runs with.

    :type method: str
    :type cfg: .config.OptimizerConfig
    :rtype: tuple[type, .config.OptimizerConfig]
    :raises UnknownMethodException: for unknown ids
    """
    if method in METHOD_ALIASES:
        method, forced = METHOD_ALIASES[method]
        cfg = replace(cfg, **forced)
    if method not in STEPPERS:
        logger.error('Unknown optimizer {}'.format(method))
        raise UnknownMethodException('unknown optimizer {}, expected one of {}'.format(method, ', '.join(METHODS)))
    return STEPPERS[method], cfg


def make_stepper(method, adapter, cfg):
    """
    Build the stepper of an optimizer id. Full-parameter methods start from the effective weight of ``adapter`` so
    that all methods of one experiment share the same starting point.

    :type method: str
    :type adapter: .adapter.LowRankAdapter
    :type cfg: .config.OptimizerConfig
    :rtype: Stepper
    """
    cls, cfg = resolve_method(method, cfg)
    if cls.dense:
        return cls(adapter.effective_weight(), cfg)
    return cls(adapter, cfg)
