# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (cli.py) is part of loft_optim                                    -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Command line interface ``loft-optim`` (also ``python -m loft_optim``).

Exit status: 0 on success, 1 if verification checks fail, 2 on configuration errors, 3 on numerical blow-up.
"""

import argparse
from dataclasses import replace
import json
import logging
import os
import sys

from . import __version__
from .config import InvalidConfigException, OptimizerConfig, config_error
from .harness import load_config, resolve_config, run_batch, compare_runs, NumericalBlowupException
from .presets import list_presets, load_preset, emit_preset, UnknownPresetException
from .util import logger
from .verify import verify_suite, write_report

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_BLOWUP = 3

ABLATION_FLAGS = ('alternating', 'first_moment_calibration', 'second_moment_calibration')


def build_parser():
    """
    :rtype: argparse.ArgumentParser
    """
    parser = argparse.ArgumentParser(prog='loft-optim',
                                     description='Low-rank adapter optimizers with calibrated optimizer states.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='log debug output')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='log warnings and errors only')
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    run = commands.add_parser('run', help='run experiments from config files or presets')
    run.add_argument('configs', nargs='*', metavar='CONFIG', help='experiment config files (JSON)')
    run.add_argument('--preset', action='append', default=[], help='run a shipped preset, may be repeated')
    run.add_argument('--out', default='.', help='output directory (default: current directory)')
    run.add_argument('--workers', type=int, default=1, help='number of worker processes (default: 1)')
    run.add_argument('--seed-override', type=int, default=None, dest='seed_override',
                     help='replace every problem and adapter seed')

    verify = commands.add_parser('verify', help='run the property verification suite')
    verify.add_argument('--filter', default=None, help='shell-style pattern selecting checks, e.g. "loft_state.*"')
    verify.add_argument('--json', default=None, dest='json_path', help='write the JSON report to this file')
    verify.add_argument('--disable', action='append', default=[], choices=ABLATION_FLAGS,
                        help='switch an optimizer mechanism off for all checks')

    presets = commands.add_parser('presets', help='list or print shipped presets')
    presets_commands = presets.add_subparsers(dest='presets_command')
    presets_commands.required = True
    presets_commands.add_parser('list', help='list preset names')
    emit = presets_commands.add_parser('emit', help='print a preset config')
    emit.add_argument('name')
    return parser


def _run(args):
    if not args.configs and not args.preset:
        raise config_error('run', 'no config file or preset given')
    configs = []
    for path in args.configs:
        configs.extend(load_config(path, args.seed_override))
    for name in args.preset:
        configs.extend(resolve_config(load_preset(name), args.seed_override))
    names = [cfg.name for cfg in configs]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise config_error('name', 'duplicate run names {} would overwrite each other'.format(', '.join(duplicates)))

    summaries = run_batch(configs, args.out, args.workers)
    if len(summaries) > 1:
        ratios = compare_runs(summaries)
        for name, ratio in ratios.items():
            logger.info('final loss {} / {} = {:.4g}'.format(name, summaries[0]['name'], ratio))
        path = os.path.join(args.out, 'comparison.json')
        with open(path, 'w') as f:
            json.dump({'reference': summaries[0]['name'], 'final_loss_ratios': ratios}, f, indent=2, sort_keys=True)
        logger.info('Wrote {}'.format(path))
    return EXIT_OK


def _verify(args):
    flags = replace(OptimizerConfig(), **{name: False for name in args.disable})
    report = verify_suite(args.filter, flags)
    if args.json_path:
        write_report(report, args.json_path)
    failed = [entry['check'] for entry in report['checks'] if entry['status'] != 'pass']
    if failed:
        logger.warning('{} of {} checks failed: {}'.format(len(failed), len(report['checks']), ', '.join(failed)))
        return EXIT_VERIFY_FAILED
    logger.info('All {} checks passed'.format(len(report['checks'])))
    return EXIT_OK


def _presets(args):
    if args.presets_command == 'list':
        for name in list_presets():
            print(name)
    else:
        sys.stdout.write(emit_preset(args.name))
    return EXIT_OK


def main(argv=None):
    """
    Entry point of the command line interface.

    :param argv: arguments without the program name, ``sys.argv[1:]`` if omitted
    :type argv: list[str]
    :return: the exit status
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    elif args.quiet:
        logger.setLevel(logging.WARNING)

    handlers = {'run': _run, 'verify': _verify, 'presets': _presets}
    try:
        return handlers[args.command](args)
    except (InvalidConfigException, UnknownPresetException) as e:
        sys.stderr.write('configuration error: {}\n'.format(e.args[0] if e.args else e))
        return EXIT_CONFIG_ERROR
    except NumericalBlowupException as e:
        sys.stderr.write('numerical blow-up at step {}: {}\n'.format(e.step, e))
        return EXIT_BLOWUP
    except (IOError, OSError) as e:
        logger.error('Cannot access {}: {}'.format(getattr(e, 'filename', None), e))
        return EXIT_CONFIG_ERROR
