# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (verify.py) is part of loft_optim                                 -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Verification suite: a registry of property checks (algebraic identities, moment exactness, matrix-factorization
recoveries, Newton-Schulz equivalences and full-rank recovery), each run with fixed seeds against a brute-force oracle.

Every check returns its largest residual and passes if it does not exceed the registered tolerance. The optimizer
flags handed to :py:func:`verify_suite` reach every check that steps an optimizer or updates moments, so switching
off a mechanism (e.g. ``first_moment_calibration``) shows which properties depend on it.
"""

from collections import OrderedDict, namedtuple
from dataclasses import replace
import copy
import fnmatch
import json

import numpy as np

from .adapter import LowRankAdapter, init_adapter, factor_grads, scaled_grads
from .clip import LayerGradView, lowrank_view, effective_global_norm, clip_scale
from .config import OptimizerConfig
from .linalg import kron, khatri_rao_cols, face_split_rows, gram_inverse, projector, lowrank_fro_norm
from .loft_state import (AlternatingState, LoftAdamState, calibration_matrices, update_first_moments,
                         update_cross_terms, reconstruct_first_moment, reconstruct_second_moment)
from .optim_adamw import (FullAdamState, FullMomentumState, LoftMomentumState, adamw_full_step, gd_momentum_full_step,
                          loft_gd_step, loft_gd_momentum_step, loft_adamw_step)
from .optim_muon import (NewtonSchulzParams, FullMuonState, LoftMuonState, newton_schulz5, newton_schulz5_lowrank,
                         update_muon_moments, muon_full_step, loft_muon_step)
from .problems import gen_rank_r_target, mf_loss_grad, subspace_init, least_squares_factor
from .util import logger, seeded_rng

Check = namedtuple('Check', ['name', 'function', 'tolerance'])

CHECKS = OrderedDict()


def register(name, tolerance):
    """
    Decorator adding a check ``function(flags) -> max_residual`` to the suite.

    :type name: str
    :type tolerance: float
    """
    def _register(function):
        assert name not in CHECKS, 'check {} registered twice'.format(name)
        CHECKS[name] = Check(name, function, tolerance)
        return function
    return _register


def relative_error(value, reference):
    """
    :return: ``||value - reference||_F / max(1, ||reference||_F)``
    :rtype: float
    """
    return float(np.linalg.norm(value - reference) / max(1.0, np.linalg.norm(reference)))


def central_difference(function, x, h=1e-5):
    """
    Central finite-difference gradient of a scalar function of a matrix.

    :param function: maps a matrix of the shape of ``x`` to a float
    :type x: numpy.ndarray
    :rtype: numpy.ndarray
    """
    grad = np.zeros_like(x)
    for index in np.ndindex(*x.shape):
        shifted = x.copy()
        shifted[index] = x[index] + h
        f_plus = function(shifted)
        shifted[index] = x[index] - h
        f_minus = function(shifted)
        grad[index] = (f_plus - f_minus) / (2 * h)
    return grad


def sequential_projection_ema(grads, projectors, beta, squared=False):
    """
    Brute-force oracle of calibrated moments: ``(1 - beta) sum_i beta^(K-i) g_i``, where ``g_i`` is the gradient of
    step ``i`` multiplied with the projectors of all steps from ``i`` to ``K``. With ``squared`` the elementwise
    squares of the ``g_i`` are averaged instead.

    :type grads: list[numpy.ndarray]
    :type projectors: list[numpy.ndarray]
    :type beta: float
    :rtype: numpy.ndarray
    """
    last = len(grads) - 1
    total = np.zeros_like(grads[0])
    for i, grad in enumerate(grads):
        term = grad
        for p in projectors[i:]:
            term = term @ p
        total += beta ** (last - i) * (term * term if squared else term)
    return (1 - beta) * total


def _random_adapter(rng, m, n, r):
    return LowRankAdapter(np.zeros((m, n)), rng.standard_normal((m, r)), rng.standard_normal((n, r)))


def _moment_run(rng, flags, moving, steps=6, m=7, n=6, r=3):
    # drives the moment updates directly with random full gradients; V moves between steps if requested
    adapter = _random_adapter(rng, m, n, r)
    state = LoftAdamState(m, n, r)
    grads, projectors = [], []
    for k in range(steps):
        if moving and k:
            adapter.snapshot()
            adapter.v = adapter.v + 0.3 * rng.standard_normal((n, r))
        grad_w = rng.standard_normal((m, n))
        grad_u, grad_v = factor_grads(grad_w, adapter)
        calib = calibration_matrices(adapter)
        scaled = scaled_grads(grad_u, grad_v, adapter)
        update_first_moments(state, calib, scaled.u, scaled.v, flags.beta1, flags)
        update_cross_terms(state, calib, scaled.u, scaled.v, flags.beta2, flags)
        grads.append(grad_w)
        projectors.append(projector(adapter.v))
    return adapter, state, grads, projectors


@register('linalg.kron_mixed_product', 1e-10)
def check_kron_mixed_product(flags):
    rng = seeded_rng(1)
    worst = 0.0
    for _ in range(20):
        a, b, c, d = (rng.standard_normal((3, 3)) for _ in range(4))
        worst = max(worst, relative_error(kron(a, b) @ kron(c, d), kron(a @ c, b @ d)))
    return worst


@register('linalg.face_split_hadamard', 1e-10)
def check_face_split_hadamard(flags):
    rng = seeded_rng(2)
    worst = 0.0
    for _ in range(20):
        a, c = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        b, d = rng.standard_normal((2, 3)), rng.standard_normal((2, 3))
        worst = max(worst, relative_error(face_split_rows(a, c) @ khatri_rao_cols(b, d), (a @ b) * (c @ d)))
    return worst


@register('linalg.face_split_kron', 1e-10)
def check_face_split_kron(flags):
    rng = seeded_rng(3)
    worst = 0.0
    for _ in range(20):
        a, b = rng.standard_normal((4, 2)), rng.standard_normal((4, 3))
        c, d = rng.standard_normal((2, 3)), rng.standard_normal((3, 2))
        worst = max(worst, relative_error(face_split_rows(a, b) @ kron(c, d), face_split_rows(a @ c, b @ d)))
    return worst


@register('linalg.projector', 1e-10)
def check_projector(flags):
    rng = seeded_rng(4)
    worst = 0.0
    for _ in range(20):
        m = rng.standard_normal((6, 2))
        p = projector(m)
        worst = max(worst, relative_error(p, p.T), relative_error(p @ p, p), relative_error(p @ m, m))
    return worst


@register('linalg.gram_inverse', 1e-9)
def check_gram_inverse(flags):
    rng = seeded_rng(5)
    worst = 0.0
    for _ in range(20):
        m = rng.standard_normal((5, 2))
        dense = np.linalg.inv(m.T @ m)
        worst = max(worst, float(np.linalg.norm(gram_inverse(m).inverse - dense) / np.linalg.norm(dense)))
    return worst


@register('linalg.lowrank_fro_norm', 1e-10)
def check_lowrank_fro_norm(flags):
    rng = seeded_rng(6)
    worst = 0.0
    for _ in range(20):
        m, n, r = rng.integers(1, 65), rng.integers(1, 65), rng.integers(1, 9)
        u, v = rng.standard_normal((m, r)), rng.standard_normal((n, r))
        dense = np.linalg.norm(u @ v.T)
        worst = max(worst, abs(lowrank_fro_norm(u, v) - dense) / dense)
    return worst


@register('adapter.scaled_grad_projection', 1e-10)
def check_scaled_grad_projection(flags):
    rng = seeded_rng(7)
    worst = 0.0
    for _ in range(20):
        adapter = _random_adapter(rng, 8, 6, 3)
        grad_w = rng.standard_normal((8, 6))
        scaled = scaled_grads(*factor_grads(grad_w, adapter), adapter)
        worst = max(worst, relative_error(scaled.u @ adapter.v.T, grad_w @ projector(adapter.v)),
                    relative_error(adapter.u @ scaled.v.T, projector(adapter.u) @ grad_w))
    return worst


@register('adapter.scale_invariance', 1e-9)
def check_scale_invariance(flags):
    rng = seeded_rng(8)
    worst = 0.0
    for _ in range(10):
        adapter = _random_adapter(rng, 8, 6, 3)
        grad_w = rng.standard_normal((8, 6))
        scaled = scaled_grads(*factor_grads(grad_w, adapter), adapter)
        for c in (0.5, 2.0, 10.0):
            other = LowRankAdapter(adapter.w0, c * adapter.u, adapter.v / c)
            other_scaled = scaled_grads(*factor_grads(grad_w, other), other)
            worst = max(worst, relative_error(other.effective_weight(), adapter.effective_weight()),
                        relative_error(other_scaled.u @ other.v.T, scaled.u @ adapter.v.T),
                        relative_error(other_scaled.v @ other.u.T, scaled.v @ adapter.u.T))
    return worst


@register('adapter.smoothness_constant', 1e-10)
def check_smoothness_constant(flags):
    rng = seeded_rng(9)
    worst = 0.0
    for _ in range(50):
        a, v = rng.standard_normal((9, 7)), rng.standard_normal((7, 3))
        u1, u2 = rng.standard_normal((9, 3)), rng.standard_normal((9, 3))

        def _scaled_u(u):
            adapter = LowRankAdapter(np.zeros((9, 7)), u, v)
            _, grad_w = mf_loss_grad(adapter.effective_weight(), a)
            return scaled_grads(*factor_grads(grad_w, adapter), adapter).u

        distance = np.linalg.norm(u1 - u2)
        worst = max(worst, abs(np.linalg.norm(_scaled_u(u1) - _scaled_u(u2)) - distance) / distance)
    return worst


@register('adapter.factor_grads_finite_difference', 1e-5)
def check_factor_grads_finite_difference(flags):
    rng = seeded_rng(10)
    worst = 0.0
    for _ in range(20):
        target = rng.standard_normal((5, 4))
        w0, u, v = rng.standard_normal((5, 4)), rng.standard_normal((5, 2)), rng.standard_normal((4, 2))
        adapter = LowRankAdapter(w0, u, v)
        _, grad_w = mf_loss_grad(adapter.effective_weight(), target)
        grad_u, grad_v = factor_grads(grad_w, adapter)
        fd_u = central_difference(lambda x: mf_loss_grad(w0 + x @ v.T, target)[0], u)
        fd_v = central_difference(lambda x: mf_loss_grad(w0 + u @ x.T, target)[0], v)
        worst = max(worst, relative_error(fd_u, grad_u), relative_error(fd_v, grad_v))
    return worst


@register('problems.loss_grad_finite_difference', 1e-5)
def check_loss_grad_finite_difference(flags):
    rng = seeded_rng(11)
    worst = 0.0
    for _ in range(20):
        target, w = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
        for convention in ('half', 'full'):
            _, grad = mf_loss_grad(w, target, convention)
            fd = central_difference(lambda x: mf_loss_grad(x, target, convention)[0], w)
            worst = max(worst, relative_error(fd, grad))
    return worst


@register('loft_state.first_moment_frozen', 1e-10)
def check_first_moment_frozen(flags):
    rng = seeded_rng(12)
    worst = 0.0
    for _ in range(20):
        adapter, state, grads, projectors = _moment_run(rng, flags, moving=False)
        oracle = (1 - flags.beta1) * sum(flags.beta1 ** (len(grads) - 1 - i) * g @ projectors[-1]
                                         for i, g in enumerate(grads))
        worst = max(worst, relative_error(reconstruct_first_moment(state.m_u, adapter.v), oracle))
    return worst


@register('loft_state.first_moment_moving', 1e-9)
def check_first_moment_moving(flags):
    rng = seeded_rng(13)
    worst = 0.0
    for _ in range(20):
        adapter, state, grads, projectors = _moment_run(rng, flags, moving=True)
        oracle = sequential_projection_ema(grads, projectors, flags.beta1)
        worst = max(worst, relative_error(reconstruct_first_moment(state.m_u, adapter.v), oracle))
    return worst


@register('loft_state.second_moment_frozen', 1e-9)
def check_second_moment_frozen(flags):
    rng = seeded_rng(14)
    worst = 0.0
    for _ in range(20):
        adapter, state, grads, projectors = _moment_run(rng, flags, moving=False)
        oracle = (1 - flags.beta2) * sum(flags.beta2 ** (len(grads) - 1 - i) * (g @ projectors[-1]) ** 2
                                         for i, g in enumerate(grads))
        worst = max(worst, relative_error(reconstruct_second_moment(state.p_u, adapter.v), oracle))
    return worst


@register('loft_state.second_moment_moving', 1e-8)
def check_second_moment_moving(flags):
    rng = seeded_rng(15)
    worst = 0.0
    for _ in range(20):
        adapter, state, grads, projectors = _moment_run(rng, flags, moving=True)
        oracle = sequential_projection_ema(grads, projectors, flags.beta2, squared=True)
        worst = max(worst, relative_error(reconstruct_second_moment(state.p_u, adapter.v), oracle))
    return worst


@register('optim.subspace_momentum_recovery', 1e-8)
def check_subspace_momentum_recovery(flags):
    """
    Factors started inside the leading singular subspaces of a rank-r target follow full momentum GD exactly.
    """
    worst = 0.0
    cfg = replace(flags, eta=0.5, beta1=0.9, weight_decay=0.0, clip_threshold=None)
    for seed in range(10):
        target = gen_rank_r_target(8, 6, 2, seed)
        u0, v0 = subspace_init(target, 2, seed + 100)
        adapter = LowRankAdapter(np.zeros((8, 6)), u0, v0)
        state = LoftMomentumState(8, 6, 2, cfg.update_u_first)
        w, full_state = adapter.effective_weight(), FullMomentumState((8, 6))
        for _ in range(50):
            loft_gd_momentum_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
            w = gd_momentum_full_step(w, mf_loss_grad(w, target)[1], full_state, cfg)
            worst = max(worst, relative_error(adapter.effective_weight(), w))
    return worst


@register('optim.alternating_least_squares', 1e-8)
def check_alternating_least_squares(flags):
    """
    With unit step size every LoFT-GD step solves the least-squares problem of the stepped factor.
    """
    rng = seeded_rng(16)
    worst = 0.0
    cfg = replace(flags, eta=1.0, weight_decay=0.0, clip_threshold=None)
    for instance in range(20):
        m, n, r = int(rng.integers(4, 13)), int(rng.integers(4, 13)), int(rng.integers(1, 4))
        target = gen_rank_r_target(m, n, int(rng.integers(r, min(m, n) + 1)), instance)
        adapter = init_adapter(m, n, r, instance + 1000, init='gaussian')
        state = AlternatingState(cfg.update_u_first)
        for _ in range(6):
            factor = 'u' if state.update_u_next else 'v'
            solved = adapter.copy()
            setattr(solved, factor, least_squares_factor(adapter, target, factor))
            optimum = mf_loss_grad(solved.effective_weight(), target)[0]
            loft_gd_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
            worst = max(worst, abs(mf_loss_grad(adapter.effective_weight(), target)[0] - optimum))
    return worst


@register('optim.one_step_optimality', 1e-10)
def check_one_step_optimality(flags):
    worst = 0.0
    cfg = replace(flags, eta=1.0, weight_decay=0.0, clip_threshold=None)
    for seed in range(20):
        target = gen_rank_r_target(7, 5, 3, seed)
        for r in (1, 2, 3):
            adapter = LowRankAdapter(np.zeros((7, 5)), *subspace_init(target, r, seed + 50))
            state = AlternatingState(cfg.update_u_first)
            for _ in range(2):
                loft_gd_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
            optimum = target.rank_r_optimum(r)
            worst = max(worst, abs(mf_loss_grad(adapter.effective_weight(), target)[0] - optimum) / max(1.0, optimum))
    return worst


@register('optim.gd_momentum_reduction', 1e-12)
def check_gd_momentum_reduction(flags):
    rng = seeded_rng(17)
    worst = 0.0
    cfg = replace(flags, eta=0.1, beta1=0.0)
    target = rng.standard_normal((6, 5))
    adapter = _random_adapter(rng, 6, 5, 2)
    plain, momentum = adapter.copy(), adapter.copy()
    plain_state, momentum_state = AlternatingState(cfg.update_u_first), LoftMomentumState(6, 5, 2, cfg.update_u_first)
    for _ in range(10):
        loft_gd_step(plain, mf_loss_grad(plain.effective_weight(), target)[1], plain_state, cfg)
        loft_gd_momentum_step(momentum, mf_loss_grad(momentum.effective_weight(), target)[1], momentum_state, cfg)
        worst = max(worst, relative_error(momentum.effective_weight(), plain.effective_weight()))
    return worst


def _trajectory_pair(lowrank_step, lowrank_state, dense_step, dense_state, adapter, target, cfg, steps):
    w = adapter.effective_weight()
    worst = 0.0
    for _ in range(steps):
        lowrank_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], lowrank_state, cfg)
        w = dense_step(w, mf_loss_grad(w, target)[1], dense_state, cfg)
        worst = max(worst, relative_error(adapter.effective_weight(), w))
    return worst


@register('optim.fullrank_adamw_recovery', 1e-5)
def check_fullrank_adamw_recovery(flags):
    """
    With r = max(m, n) and full-rank factors LoFT-AdamW reproduces the AdamW weight trajectory. The target has
    full rank too; fitting a low-rank target drives the full-rank factors towards singularity
    and the two trajectories apart.
    """
    cfg = replace(flags, eta=0.05, weight_decay=0.0, clip_threshold=None)
    target = gen_rank_r_target(8, 8, 8, 0)
    adapter = init_adapter(8, 8, 8, 1, init='gaussian')
    return _trajectory_pair(loft_adamw_step, LoftAdamState(8, 8, 8, cfg.update_u_first), adamw_full_step,
                            FullAdamState((8, 8)), adapter, target, cfg, 100)


@register('optim.fullrank_muon_recovery', 1e-6)
def check_fullrank_muon_recovery(flags):
    cfg = replace(flags, eta=0.01, mu=0.9, weight_decay=0.0, clip_threshold=None)
    target = gen_rank_r_target(8, 8, 8, 0)
    adapter = init_adapter(8, 8, 8, 1, init='gaussian')
    return _trajectory_pair(loft_muon_step, LoftMuonState(8, 8, 8, cfg.update_u_first), muon_full_step,
                            FullMuonState((8, 8)), adapter, target, cfg, 50)


def _step_pair(step_function, state_factory, flags, seed):
    rng = seeded_rng(seed)
    cfg = replace(flags, eta=0.01, weight_decay=0.0)
    target = rng.standard_normal((7, 5))
    adapter = _random_adapter(rng, 7, 5, 2)
    state = state_factory(cfg)
    for _ in range(6):
        before = adapter.copy()
        step_function(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
        yield before, adapter


@register('optim.alternation', 0)
def check_alternation(flags):
    """
    Counts steps in which not exactly one factor changed.
    """
    violations = 0
    for step_function, factory in ((loft_adamw_step, lambda cfg: LoftAdamState(7, 5, 2, cfg.update_u_first)),
                                   (loft_muon_step, lambda cfg: LoftMuonState(7, 5, 2, cfg.update_u_first))):
        for before, after in _step_pair(step_function, factory, flags, 18):
            changed = int(not np.array_equal(before.u, after.u)) + int(not np.array_equal(before.v, after.v))
            violations += int(changed != 1)
    return violations


@register('optim.update_subspace', 1e-10)
def check_update_subspace(flags):
    """
    A U-step moves the weight within the row space of V, a V-step within the column space of U.
    """
    worst = 0.0
    for before, after in _step_pair(loft_adamw_step, lambda cfg: LoftAdamState(7, 5, 2, cfg.update_u_first),
                                    flags, 19):
        delta = after.effective_weight() - before.effective_weight()
        if not np.array_equal(before.u, after.u):
            worst = max(worst, float(np.linalg.norm(delta - delta @ projector(before.v))))
        else:
            worst = max(worst, float(np.linalg.norm(delta - projector(before.u) @ delta)))
    return worst


@register('optim.weight_decay', 1e-12)
def check_weight_decay(flags):
    rng = seeded_rng(20)
    worst = 0.0
    cfg = replace(flags, eta=0.1, weight_decay=0.1)
    for step_function, state in ((loft_adamw_step, LoftAdamState(6, 5, 2, cfg.update_u_first)),
                                 (loft_muon_step, LoftMuonState(6, 5, 2, cfg.update_u_first))):
        adapter = _random_adapter(rng, 6, 5, 2)
        product = adapter.u @ adapter.v.T
        step_function(adapter, np.zeros((6, 5)), state, cfg)
        worst = max(worst, relative_error(adapter.u @ adapter.v.T, (1 - cfg.weight_decay * cfg.eta) * product))
    return worst


@register('optim.state_scale_invariance', 1e-8)
def check_state_scale_invariance(flags):
    """
    Rebalancing the factors between two steps, ``(U, V) -> (cU, V/c)``, leaves the weight trajectory unchanged:
    the calibration matrices transport the moments into the new coordinates.
    """
    rng = seeded_rng(21)
    worst = 0.0
    cfg = replace(flags, eta=0.01)
    target = rng.standard_normal((7, 5))
    for c in (0.5, 2.0):
        adapter = _random_adapter(rng, 7, 5, 2)
        state = LoftAdamState(7, 5, 2, cfg.update_u_first)
        for _ in range(3):
            loft_adamw_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
        other, other_state = adapter.copy(), copy.deepcopy(state)
        other.u, other.v = c * other.u, other.v / c
        for _ in range(4):
            loft_adamw_step(adapter, mf_loss_grad(adapter.effective_weight(), target)[1], state, cfg)
            loft_adamw_step(other, mf_loss_grad(other.effective_weight(), target)[1], other_state, cfg)
            worst = max(worst, relative_error(other.effective_weight(), adapter.effective_weight()))
    return worst


@register('muon.newton_schulz_scalar_recurrence', 1e-10)
def check_newton_schulz_scalar_recurrence(flags):
    """
    On a diagonal input the iteration acts on every normalized singular value through
    ``x <- a x + b x^3 + c x^5``; a zero input stays zero.
    """
    rng = seeded_rng(22)
    params = NewtonSchulzParams(n_steps=flags.ns_steps)
    worst = float(np.linalg.norm(newton_schulz5(np.zeros((3, 4)), params)))
    for shape in ((3, 3), (4, 2), (2, 5)):
        s = rng.uniform(0.1, 5.0, min(shape))
        g = np.zeros(shape)
        g[np.arange(len(s)), np.arange(len(s))] = s
        x = s / (np.linalg.norm(s) + params.eps)
        for _ in range(params.n_steps):
            x = params.a * x + params.b * x ** 3 + params.c * x ** 5
        expected = np.zeros(shape)
        expected[np.arange(len(s)), np.arange(len(s))] = x
        worst = max(worst, relative_error(newton_schulz5(g, params), expected))
    return worst


@register('muon.newton_schulz_lowrank', 1e-8)
def check_newton_schulz_lowrank(flags):
    """
    The factored iteration matches the dense one on ``U V^T``, for wide and for tall inputs.
    """
    rng = seeded_rng(23)
    params = NewtonSchulzParams(n_steps=flags.ns_steps)
    worst = 0.0
    for instance in range(50):
        small, large = sorted(rng.integers(1, 17, 2))
        m, n = (small, large) if instance % 2 else (large, small)
        r = int(rng.integers(1, 5))
        u, v = rng.standard_normal((m, r)), rng.standard_normal((n, r))
        dense = newton_schulz5(u @ v.T, params)
        worst = max(worst, float(np.linalg.norm(newton_schulz5_lowrank(u, v, params) @ v.T - dense)
                                 / np.linalg.norm(dense)))
    return worst


@register('muon.momentum_linearity', 1e-10)
def check_muon_momentum_linearity(flags):
    rng = seeded_rng(24)
    worst = 0.0
    for _ in range(20):
        adapter = _random_adapter(rng, 7, 6, 3)
        state = LoftMuonState(7, 6, 3)
        grads = []
        for _ in range(5):
            grad_w = rng.standard_normal((7, 6))
            scaled = scaled_grads(*factor_grads(grad_w, adapter), adapter)
            update_muon_moments(state, calibration_matrices(adapter), scaled.u, scaled.v, flags.mu, flags)
            grads.append(grad_w)
        oracle = sum(flags.mu ** (len(grads) - 1 - i) * g for i, g in enumerate(grads)) @ projector(adapter.v)
        worst = max(worst, relative_error(reconstruct_first_moment(state.m_u, adapter.v), oracle))
    return worst


@register('muon.dense_step_match', 1e-10)
def check_muon_dense_step_match(flags):
    """
    With orthonormal square V and no momentum a LoFT-Muon U-step equals a dense Muon step.
    """
    rng = seeded_rng(25)
    worst = 0.0
    cfg = replace(flags, eta=0.05, mu=0.0, nesterov=False, weight_decay=0.0, clip_threshold=None,
                  update_u_first=True, alternating=True)
    for _ in range(10):
        v, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        adapter = LowRankAdapter(np.zeros((7, 5)), rng.standard_normal((7, 5)), v)
        grad_w = rng.standard_normal((7, 5))
        w = muon_full_step(adapter.effective_weight(), grad_w, FullMuonState((7, 5)), cfg)
        loft_muon_step(adapter, grad_w, LoftMuonState(7, 5, 5), cfg)
        worst = max(worst, relative_error(adapter.effective_weight(), w))
    return worst


@register('clip.effective_norm', 1e-10)
def check_clip_effective_norm(flags):
    rng = seeded_rng(26)
    worst = 0.0
    for _ in range(20):
        layers, dense = [], 0.0
        for m, n, r in ((9, 7, 3), (6, 6, 6)):
            adapter = _random_adapter(rng, m, n, r)
            grad_w = rng.standard_normal((m, n))
            layers.append(lowrank_view(scaled_grads(*factor_grads(grad_w, adapter), adapter), adapter, True))
            dense += np.linalg.norm(grad_w @ projector(adapter.v)) ** 2
            if r == n:
                # full-rank layer sees the full gradient
                worst = max(worst, abs(np.linalg.norm(grad_w @ projector(adapter.v)) - np.linalg.norm(grad_w)))
        norm = effective_global_norm(layers)
        worst = max(worst, abs(norm - np.sqrt(dense)) / np.sqrt(dense))
        threshold = 0.5 * norm
        scale = clip_scale(norm, threshold)
        clipped = [LayerGradView(scale * view.active_grad, view.inactive_factor) for view in layers]
        worst = max(worst, abs(effective_global_norm(clipped) - threshold) / threshold)
    return worst


def check_names(pattern=None):
    """
    :param pattern: shell-style pattern, e.g. ``loft_state.*``; all checks if omitted
    :return: sorted names of the matching checks
    :rtype: list[str]
    """
    return sorted(name for name in CHECKS if pattern is None or fnmatch.fnmatchcase(name, pattern))


def run_check(name, flags=None):
    """
    Run a single check.

    :param flags: optimizer config handed to the check, defaults if omitted
    :type name: str
    :type flags: .config.OptimizerConfig
    :return: one report entry with ``check``, ``status``, ``max_residual`` and ``tolerance``
    :rtype: dict
    """
    check = CHECKS[name]
    flags = flags or OptimizerConfig()
    try:
        residual = float(check.function(flags))
    except Exception as e:
        logger.warning('Check {} raised {}: {}'.format(name, type(e).__name__, e))
        return {'check': name, 'status': 'error', 'max_residual': None, 'tolerance': check.tolerance}
    passed = bool(np.isfinite(residual) and residual <= check.tolerance)
    if passed:
        logger.info('Check {} passed (residual {:.3e}, tolerance {:.0e})'.format(name, residual, check.tolerance))
    else:
        logger.warning('Check {} FAILED (residual {:.3e}, tolerance {:.0e})'.format(name, residual, check.tolerance))
    return {'check': name, 'status': 'pass' if passed else 'fail',
            'max_residual': residual if np.isfinite(residual) else None, 'tolerance': check.tolerance}


def verify_suite(pattern=None, flags=None):
    """
    Run all registered checks matching ``pattern``.

    :param pattern: shell-style name pattern
    :param flags: optimizer config handed to every check; switch mechanisms off here to see which checks need them
    :type pattern: str
    :type flags: .config.OptimizerConfig
    :return: ``{"checks": [...], "passed": bool}`` with the checks sorted by name
    :rtype: dict
    """
    names = check_names(pattern)
    if not names:
        logger.warning('No check matches {}'.format(pattern))
    checks = [run_check(name, flags) for name in names]
    return {'checks': checks, 'passed': all(entry['status'] == 'pass' for entry in checks)}


def write_report(report, path):
    """
    :type report: dict
    :type path: str
    """
    with open(path, 'w') as f:
        json.dump(report, f, indent=2, sort_keys=True)
    logger.info('Wrote verification report {}'.format(path))
