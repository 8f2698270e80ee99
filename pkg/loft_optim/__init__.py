# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (__init__.py) is part of loft_optim                               -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Low-rank adapter optimizers whose optimizer states are calibrated so that the induced update of the full weight
matrix mimics full-parameter GD, momentum, AdamW and Muon, plus the reference full-parameter optimizers and an
experiment harness.
Use :py:func:`init_adapter` to build a :py:class:`LowRankAdapter` and one of the ``loft_*_step`` functions or a
:py:class:`.stepper.Stepper` to optimize it.
"""

from .adapter import LowRankAdapter, init_adapter, effective_weight, factor_grads, scaled_grads
from .config import OptimizerConfig
from .loft_state import LoftAdamState
from .optim_adamw import (FullAdamState, FullMomentumState, LoraAdamState, adamw_full_step, gd_momentum_full_step,
                          lora_adamw_step, loft_gd_step, loft_gd_momentum_step, loft_adamw_step)
from .optim_muon import (NewtonSchulzParams, FullMuonState, LoftMuonState, newton_schulz5, newton_schulz5_lowrank,
                         muon_full_step, loft_muon_step)
from .problems import MatrixTarget, gen_rank_r_target, mf_loss_grad, subspace_init

__version__ = '1.0.0'
