# -*- coding: utf-8 -*-
"""Command line interface: ``backstep kernels|simulate|paper-example|target-check``"""
import argparse
import logging
import sys

import yaml

from . import experiments
from .exceptions import BackstepError, ConfigurationError, NoConvergenceError
from .ports import PortValidationError
from .version import __version__

__all__ = ['main', 'build_parser', 'EXIT_OK', 'EXIT_ERROR', 'EXIT_INVALID', 'EXIT_NO_CONVERGENCE']

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3

# The mode each subcommand forces; None keeps the mode of the configuration file
_COMMAND_MODES = {
    'kernels': 'kernels-only',
    'simulate': None,
    'paper-example': 'both',
    'target-check': 'target-check',
}

_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _case(value):
    if value == 'auto':
        return value
    if value in ('1', '2', '3'):
        return int(value)
    raise argparse.ArgumentTypeError("case must be one of auto, 1, 2, 3, got '{}'".format(value))


def build_parser():
    parser = argparse.ArgumentParser(prog='backstep',
                                     description='Bilateral backstepping boundary control of 2x2 hyperbolic systems')
    parser.add_argument('--version', action='version', version='%(prog)s {}'.format(__version__))

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='YAML experiment configuration')
    common.add_argument('--case', type=_case, help='speed case: auto, 1, 2 or 3')
    common.add_argument('--out', metavar='DIR', help='output directory')
    common.add_argument('--nx', type=int, help='plant grid nodes')
    common.add_argument('--nw', type=int, help='kernel grid nodes in both directions')
    common.add_argument('--cfl', type=float, help='Courant number in (0, 1]')
    common.add_argument('--t-final', dest='t_final', type=float, help='simulation horizon')
    common.add_argument('--tol', type=float, help='Picard and Volterra stopping tolerance')
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')

    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    subparsers.add_parser('kernels', parents=[common], help='solve and check the kernels only')
    subparsers.add_parser('simulate', parents=[common], help='run the configured open and/or closed loop')
    subparsers.add_parser('paper-example',
                          parents=[common],
                          help='the varying-speed example: open and closed loop of the built-in profile')
    subparsers.add_parser('target-check', parents=[common], help='simulate the target system of the profile')
    return parser


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exception:
        raise ConfigurationError("cannot read configuration '{}': {}".format(path, exception))
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError:
        # Let validate_config report the line
        return text
    return raw or {}


def load_config(args):
    """Read the configuration file of ``args``, merge the command line overrides and validate the result."""
    raw = _read_config(args.config)
    if isinstance(raw, str):
        return experiments.validate_config(raw)

    overrides = {
        'mode': _COMMAND_MODES[args.command],
        'output.directory': args.out,
        'plant.nx': args.nx,
        'plant.cfl': args.cfl,
        'plant.t_final': args.t_final,
        'kernel.nw': args.nw,
        'kernel.ns': args.nw,
        'kernel.case': args.case,
        'tolerances.picard': args.tol,
        'tolerances.volterra': args.tol,
    }
    if args.command == 'paper-example':
        overrides['coefficients.name'] = 'paper-eq60'
        overrides['initial.name'] = 'paper'
    return experiments.validate_config(experiments.apply_overrides(raw, overrides))


def _report(summary):
    for key in ('case', 'tf', 'picard_iterations', 'kernel_residual', 'bound_margin', 'open_loop_growth',
                'closed_loop_final_relative_l2', 'closed_loop_settling_time', 'target_final_relative_l2'):
        if key in summary:
            print('{}: {}'.format(key, summary[key]))
    for row in summary.get('target_check', ()):
        print('target check nx={nx}: error {error:.3e}, order {order}'.format(**row))
    for warning in summary.get('warnings', ()):
        print('warning: {}'.format(warning))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=_LOG_LEVELS[min(args.verbose, len(_LOG_LEVELS) - 1)],
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        config = load_config(args)
        summary = experiments.run_experiment(config, label=args.command)
    except (ConfigurationError, PortValidationError) as exception:
        field = getattr(exception, 'field', None) or getattr(exception, 'port', None)
        line = getattr(exception, 'line', None)
        location = ' (field {})'.format(field) if field else ''
        location += ' (line {})'.format(line) if line else ''
        print('invalid configuration{}: {}'.format(location, exception), file=sys.stderr)
        return EXIT_INVALID
    except NoConvergenceError as exception:
        print('{}: {} after {} iterations'.format(exception.provenance, exception, exception.iterations),
              file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except BackstepError as exception:
        print('{}: {}'.format(exception.provenance, exception), file=sys.stderr)
        return EXIT_ERROR

    _report(summary)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
