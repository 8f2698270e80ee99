# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (harness.py) is part of loft_optim                                -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Experiment harness: versioned JSON experiment configs, deterministic runs of one optimizer on a matrix-factorization
target, trajectory CSVs with JSON sidecars and batch execution with a process pool.

A config file holds one experiment or, with a ``runs`` list, several experiments that share the top-level settings;
every entry of ``runs`` is deep-merged onto the top level and needs its own ``name``.
"""

from collections import namedtuple
from dataclasses import dataclass, field, asdict, replace
from multiprocessing import Pool
import copy
import json
import os
import time

import numpy as np
import pandas as pd

from .adapter import init_adapter, INIT_MODES
from .checkpoint import save_checkpoint
from .config import OptimizerConfig, config_error, from_dict, join_path
from .linalg import NonFiniteException
from .problems import gen_rank_r_target, mf_loss_grad, LOSS_CONVENTIONS
from .stepper import make_stepper, resolve_method, UnknownMethodException
from .util import logger

CONFIG_VERSION = 1
SCHEDULES = ('constant', 'linear')
CSV_COLUMNS = ['step', 'loss', 'grad_norm', 'clamps', 'ms']

TrajectoryRecord = namedtuple('TrajectoryRecord', CSV_COLUMNS)
TrajectoryRecord.__doc__ = """
One row of a trajectory: the step index, the loss after the step, the effective-gradient norm the step saw (before
clipping), the cumulative clamp counter and the step's wall time in milliseconds (0 unless timing is recorded).
"""

RunResult = namedtuple('RunResult', ['config', 'trajectory', 'summary', 'stepper', 'target', 'weights'])


class NumericalBlowupException(ArithmeticError):
    """
    Raised if a run produces a non-finite loss or weight. ``step`` holds the offending step index.
    """
    def __init__(self, message, step):
        ArithmeticError.__init__(self, message)
        self.step = step

    def __reduce__(self):
        return type(self), (self.args[0], self.step)


@dataclass
class ProblemSpec(object):
    """
    Matrix-factorization problem: an ``m x n`` target of rank ``target_rank`` drawn from ``seed``, with the ``half``
    or ``full`` loss convention.
    """
    m: int = 8
    n: int = 8
    target_rank: int = 2
    seed: int = 0
    loss: str = 'half'

    def validate(self, prefix='problem'):
        """
        :rtype: ProblemSpec
        """
        for name in ('m', 'n', 'target_rank'):
            if getattr(self, name) < 1:
                raise config_error(join_path(prefix, name), 'must be positive')
        if self.target_rank > min(self.m, self.n):
            raise config_error(join_path(prefix, 'target_rank'), 'must not exceed min(m, n) = {}'
                               .format(min(self.m, self.n)))
        if self.seed < 0:
            raise config_error(join_path(prefix, 'seed'), 'must be non-negative')
        if self.loss not in LOSS_CONVENTIONS:
            raise config_error(join_path(prefix, 'loss'), 'must be one of {}'.format(', '.join(LOSS_CONVENTIONS)))
        return self


@dataclass
class AdapterSpec(object):
    """
    Adapter rank, initialization seed and mode (``lora``, ``gaussian`` or ``subspace``). Full-parameter methods start
    from the effective weight of this adapter.
    """
    rank: int = 2
    seed: int = 1
    init: str = 'lora'

    def validate(self, prefix='adapter'):
        """
        :rtype: AdapterSpec
        """
        if self.rank < 1:
            raise config_error(join_path(prefix, 'rank'), 'must be positive')
        if self.seed < 0:
            raise config_error(join_path(prefix, 'seed'), 'must be non-negative')
        if self.init not in INIT_MODES:
            raise config_error(join_path(prefix, 'init'), 'must be one of {}'.format(', '.join(INIT_MODES)))
        return self


@dataclass
class ExperimentConfig(object):
    """
    One fully resolved experiment. ``log_every = 0`` disables progress logging; ``record_timing`` fills the ``ms``
    column, which otherwise stays 0 so that repeated runs write identical files; ``checkpoint`` writes the final
    stepper state next to the trajectory.
    """
    name: str = 'run'
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    adapter: AdapterSpec = field(default_factory=AdapterSpec)
    method: str = 'loft_adamw'
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    iterations: int = 100
    log_every: int = 0
    schedule: str = 'constant'
    record_timing: bool = False
    checkpoint: bool = False

    def validate(self, prefix=''):
        """
        Cross-field checks on top of the per-section ones.

        :rtype: ExperimentConfig
        :raises InvalidConfigException: on the first invalid value
        """
        self.problem.validate(join_path(prefix, 'problem'))
        self.adapter.validate(join_path(prefix, 'adapter'))
        self.optimizer.validate(join_path(prefix, 'optimizer'))
        if not self.name or os.sep in self.name:
            raise config_error(join_path(prefix, 'name'), 'must be a non-empty file name')
        try:
            resolve_method(self.method, self.optimizer)
        except UnknownMethodException as e:
            raise config_error(join_path(prefix, 'method'), e.args[0])
        if self.optimizer.alpha != 1 and self.method != 'lora_adamw':
            raise config_error(join_path(prefix, 'optimizer.alpha'), 'only the lora_adamw baseline accepts alpha != 1')
        if self.adapter.init == 'subspace' and self.adapter.rank > self.problem.target_rank:
            raise config_error(join_path(prefix, 'adapter.rank'), 'subspace initialization needs rank <= target_rank')
        if self.iterations < 1:
            raise config_error(join_path(prefix, 'iterations'), 'must be at least 1')
        if self.log_every < 0:
            raise config_error(join_path(prefix, 'log_every'), 'must be non-negative')
        if self.schedule not in SCHEDULES:
            raise config_error(join_path(prefix, 'schedule'), 'must be one of {}'.format(', '.join(SCHEDULES)))
        return self

    def to_dict(self):
        """
        :rtype: dict
        """
        return asdict(self)

    @classmethod
    def from_dict(cls, data, prefix=''):
        """
        :rtype: ExperimentConfig
        :raises InvalidConfigException: on unknown fields, wrong kinds or invalid values
        """
        sections = {'problem': lambda value, path: from_dict(ProblemSpec, value, path),
                    'adapter': lambda value, path: from_dict(AdapterSpec, value, path),
                    'optimizer': lambda value, path: from_dict(OptimizerConfig, value, path)}
        return from_dict(cls, data, prefix, sections).validate(prefix)


def deep_merge(base, override):
    """
    :return: a copy of ``base`` with ``override`` merged in, nested objects recursively
    :rtype: dict
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def with_seed(cfg, seed):
    """
    :return: a copy of the experiment with problem and adapter seeds replaced
    :rtype: ExperimentConfig
    """
    return replace(cfg, problem=replace(cfg.problem, seed=seed), adapter=replace(cfg.adapter, seed=seed))


def resolve_config(document, seed_override=None):
    """
    Resolve a parsed config document into its experiments.

    :param document: the parsed JSON document
    :param seed_override: replaces every problem and adapter seed if given
    :type document: dict
    :type seed_override: int
    :rtype: list[ExperimentConfig]
    :raises InvalidConfigException: on any invalid field, naming its dotted path
    """
    if not isinstance(document, dict):
        raise config_error('config', 'must be an object')
    if 'version' not in document:
        raise config_error('version', 'missing')
    if document['version'] != CONFIG_VERSION:
        raise config_error('version', 'unsupported version {!r}, expected {}'.format(document['version'],
                                                                                      CONFIG_VERSION))
    base = {key: value for key, value in document.items() if key not in ('version', 'runs')}
    if 'runs' not in document:
        configs = [ExperimentConfig.from_dict(base)]
    else:
        runs = document['runs']
        if not isinstance(runs, list) or not runs:
            raise config_error('runs', 'must be a non-empty list')
        configs = []
        for i, run in enumerate(runs):
            prefix = 'runs[{}]'.format(i)
            if not isinstance(run, dict) or 'name' not in run:
                raise config_error(prefix, 'every run needs a name')
            configs.append(ExperimentConfig.from_dict(deep_merge(base, run), prefix))
        names = [cfg.name for cfg in configs]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise config_error('runs', 'duplicate run names {}'.format(', '.join(duplicates)))
    if seed_override is not None:
        configs = [with_seed(cfg, seed_override) for cfg in configs]
    return configs


def load_config(path, seed_override=None):
    """
    Read and resolve a config file.

    :type path: str
    :type seed_override: int
    :rtype: list[ExperimentConfig]
    :raises InvalidConfigException: on invalid JSON or invalid fields
    """
    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except ValueError as e:
        raise config_error(path, 'invalid JSON ({})'.format(e))
    logger.debug('Loaded config {}'.format(path))
    return resolve_config(document, seed_override)


def scheduled_eta(cfg, k):
    """
    Step size of the 0-based step ``k``: constant, or linear decay ``eta * (1 - k / T)``.

    :type cfg: ExperimentConfig
    :type k: int
    :rtype: float
    """
    eta = cfg.optimizer.eta
    if cfg.schedule == 'linear':
        return eta * (1 - k / cfg.iterations)
    return eta


def _blowup(cfg, step):
    message = 'run {} blew up at step {}'.format(cfg.name, step)
    logger.error(message)
    return NumericalBlowupException(message, step)


def _loss_grad(stepper, target, cfg, step):
    try:
        loss, grad = mf_loss_grad(stepper.weight(), target, cfg.problem.loss)
    except NonFiniteException:
        raise _blowup(cfg, step)
    if not np.isfinite(loss):
        raise _blowup(cfg, step)
    return loss, grad


def run_experiment(cfg, out_dir=None, keep_weights=False):
    """
    Run one experiment. The target, the adapter and every step are pure functions of the config, so repeated runs
    produce identical trajectories.

    If ``out_dir`` is given, ``<name>.csv`` (the trajectory, 17 significant digits), ``<name>.json`` (resolved config
    and final metrics) and, if enabled, ``<name>.ckpt.json`` are written there.

    :type cfg: ExperimentConfig
    :param out_dir: output directory, nothing is written if omitted
    :param keep_weights: keep the dense weight after every step (and the initial one) in the result
    :type out_dir: str
    :type keep_weights: bool
    :rtype: RunResult
    :raises NumericalBlowupException: if the loss or the weights become non-finite or a step hits a singular matrix
    """
    problem = cfg.problem
    target = gen_rank_r_target(problem.m, problem.n, problem.target_rank, problem.seed)
    adapter = init_adapter(problem.m, problem.n, cfg.adapter.rank, cfg.adapter.seed, init=cfg.adapter.init,
                           target=target)
    stepper = make_stepper(cfg.method, adapter, cfg.optimizer)
    logger.info('Starting {} ({}, {}x{}, r={}, {} iterations)'.format(cfg.name, cfg.method, problem.m, problem.n,
                                                                    cfg.adapter.rank, cfg.iterations))

    weights = [stepper.weight().copy()] if keep_weights else None
    initial_loss, grad = _loss_grad(stepper, target, cfg, 0)
    records = []
    started = time.perf_counter()
    for k in range(1, cfg.iterations + 1):
        step_started = time.perf_counter()
        try:
            stepper.step(grad, eta=scheduled_eta(cfg, k - 1))
        except (NonFiniteException, np.linalg.LinAlgError):
            raise _blowup(cfg, k)
        ms = (time.perf_counter() - step_started) * 1000 if cfg.record_timing else 0.0
        loss, grad = _loss_grad(stepper, target, cfg, k)
        records.append(TrajectoryRecord(k, loss, stepper.state.grad_norm, stepper.state.clamps, ms))
        if keep_weights:
            weights.append(stepper.weight().copy())
        if cfg.log_every and k % cfg.log_every == 0:
            logger.info('{} step {}: loss={:.6e} grad_norm={:.6e}'.format(cfg.name, k, loss,
                                                                          stepper.state.grad_norm))
    wall_time = time.perf_counter() - started

    if stepper.state.clamps:
        logger.warning('{}: clamped {} negative second-moment entries'.format(cfg.name, stepper.state.clamps))
    trajectory = pd.DataFrame(records, columns=CSV_COLUMNS)
    summary = {'name': cfg.name, 'config': cfg.to_dict(), 'initial_loss': initial_loss,
               'final_loss': records[-1].loss, 'final_grad_norm': records[-1].grad_norm,
               'clamps': stepper.state.clamps, 'state_size': stepper.state_size()}
    if cfg.record_timing:
        summary['wall_time_s'] = wall_time
    logger.info('Finished {}: final loss {:.6e}'.format(cfg.name, summary['final_loss']))

    if out_dir is not None:
        write_outputs(cfg, trajectory, summary, out_dir)
        if cfg.checkpoint:
            save_checkpoint(os.path.join(out_dir, cfg.name + '.ckpt.json'), stepper, target, cfg.name)
    return RunResult(cfg, trajectory, summary, stepper, target, weights)


def write_outputs(cfg, trajectory, summary, out_dir):
    """
    Write the trajectory CSV and the JSON sidecar of a run.

    :return: paths of the CSV and the sidecar
    :rtype: tuple[str, str]
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, cfg.name + '.csv')
    json_path = os.path.join(out_dir, cfg.name + '.json')
    trajectory.to_csv(csv_path, index=False, float_format='%.17g')
    with open(json_path, 'w') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    logger.info('Wrote {} and {}'.format(csv_path, json_path))
    return csv_path, json_path


def _run_summary(args):
    cfg, out_dir = args
    return run_experiment(cfg, out_dir).summary


def run_batch(configs, out_dir=None, workers=1):
    """
    Run independent experiments, in a process pool if ``workers > 1``.

    :type configs: list[ExperimentConfig]
    :type out_dir: str
    :type workers: int
    :return: the run summaries in input order
    :rtype: list[dict]
    """
    jobs = [(cfg, out_dir) for cfg in configs]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_summary(job) for job in jobs]
    with Pool(min(workers, len(jobs))) as pool:
        return pool.map(_run_summary, jobs)


def compare_runs(summaries, reference=None):
    """
    Final-loss ratios of several runs against a reference run.

    :param summaries: run summaries as returned by :py:func:`run_batch`
    :param reference: name of the reference run, the first run if omitted
    :type summaries: list[dict]
    :type reference: str
    :return: run name to ``final_loss / final_loss(reference)``
    :rtype: dict[str, float]
    """
    by_name = {summary['name']: summary for summary in summaries}
    reference = reference or summaries[0]['name']
    if reference not in by_name:
        raise KeyError('no run named {}'.format(reference))
    base = by_name[reference]['final_loss']
    return {name: summary['final_loss'] / max(base, np.finfo(np.float64).tiny) for name, summary in by_name.items()}


def max_relative_deviation(weights, reference_weights):
    """
    :param weights: weight trajectory of one run
    :param reference_weights: weight trajectory of the reference run, same length
    :return: ``max_k ||W_k - R_k||_F / max(1, ||R_k||_F)``
    :rtype: float
    """
    assert len(weights) == len(reference_weights), 'trajectories differ in length'
    return max(float(np.linalg.norm(w - r) / max(1.0, np.linalg.norm(r)))
               for w, r in zip(weights, reference_weights))
