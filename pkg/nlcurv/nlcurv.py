# Copyright 2024 Christophe Bedard
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Compute nonlocal curvatures and fractional operators from the command line."""

import argparse
import os
import sys
from typing import Any
from typing import Dict
from typing import List
from typing import Optional

from .commands import cmd_curvature
from .commands import cmd_fracops
from .commands import cmd_perimeter
from .commands import cmd_sphere_table
from .commands import cmd_verify
from .commands import FRACOPS_OPERATORS
from .commands import FracopsRequest
from .commands import parse_floats
from .commands import table_header
from .config import load_config
from .config import RunConfig
from .curvature import REPRESENTATIONS
from .errors import EXIT_CONFIG_ERROR
from .errors import NlcurvError
from .logger import logger
from .quadrature import ANGULAR_RULES
from .quadrature import PV_MODES
from .quadrature import TAIL_HANDLING
from .verify import SUITES


__version__ = '0.1.0'


DEFAULT_THREADS = 1
ENV_VAR_CONFIG = 'NLCURV_CONFIG'
ENV_VAR_QUIET = 'NLCURV_QUIET'
ENV_VAR_REPRODUCIBLE = 'NLCURV_REPRODUCIBLE'
ENV_VAR_THREADS = 'NLCURV_THREADS'
ENV_VAR_VERBOSE = 'NLCURV_VERBOSE'

# Flags that override QuadratureSpec fields: dest -> field
QUADRATURE_FLAGS = {
    'eps_cutoff': 'eps_cutoff',
    'r_max': 'r_max',
    'n_phi': 'n_phi',
    'n_dir': 'n_dir',
    'n_polar': 'n_polar',
    'samples': 'mc_samples',
    'seed': 'rng_seed',
    'tail_handling': 'tail_handling',
    'angular_rule': 'angular_rule',
    'pv_mode': 'pv_mode',
}


class EnvDefaultOption(argparse.Action):
    """
    Action that uses an env var value as the default if it exists.

    Inspired by: https://stackoverflow.com/a/10551190/6476709
    """

    def __init__(
        self,
        env_var: str,
        default: Any,
        help: Optional[str] = None,  # noqa: A002
        **kwargs: Any,
    ) -> None:
        """Create an EnvDefaultOption."""
        # Set default to env var value if it exists
        if env_var in os.environ:
            default = os.environ[env_var]
        if help:  # pragma: no cover
            help += f' [env: {env_var}]'
        super(EnvDefaultOption, self).__init__(
            default=default,
            help=help,
            **kwargs,
        )

    def __call__(  # noqa: D102
        self,
        parser: argparse.ArgumentParser,
        namespace: argparse.Namespace,
        values: Any,
        option_string: Optional[str] = None,
    ) -> None:
        setattr(namespace, self.dest, values)


class EnvDefaultStoreTrue(argparse.Action):
    """
    Action similar to 'store_true' that uses an env var value as the default if it exists.

    Partly copied from arparse.{_StoreConstAction,_StoreTrueAction}.
    """

    def __init__(
        self,
        option_strings: str,
        dest: str,
        env_var: str,
        default: bool = False,
        help: Optional[str] = None,  # noqa: A002
    ) -> None:
        """Create an EnvDefaultStoreTrue."""
        # Set default value to true if the env var exists
        default = env_var in os.environ
        if help:  # pragma: no cover
            help += f' [env: {env_var} (any value to enable)]'
        super(EnvDefaultStoreTrue, self).__init__(
            option_strings=option_strings,
            dest=dest,
            nargs=0,
            const=True,
            default=default,
            required=False,
            help=help,
        )

    def __call__(  # noqa: D102
        self,
        parser: argparse.ArgumentParser,
        namespace: argparse.Namespace,
        values: Any,
        option_string: Optional[str] = None,
    ) -> None:
        setattr(namespace, self.dest, self.const)


def _add_scene_arguments(parser: argparse.ArgumentParser) -> None:
    """Add the arguments shared by the commands that run on a scene."""
    parser.add_argument(
        '-s', '--scene', metavar='SCENE',
        default=None,
        help=(
            "scene as 'name:key=value,...' or 'mesh:PATH'; names: sphere, plane, torus, "
            'graph, implicit-sphere, icosphere, torus-mesh'
        ),
    )
    parser.add_argument(
        '--sigma', '--sweep-sigma', metavar='SIGMA[,SIGMA]', dest='sigmas',
        default=None,
        help='comma-separated orders in (0, 1)',
    )
    parser.add_argument(
        '--eps-cutoff', type=float, default=None,
        help='inner cutoff of the principal value integrals',
    )
    parser.add_argument(
        '--r-max', type=float, default=None,
        help='outer truncation radius',
    )
    parser.add_argument(
        '--csv', metavar='PATH', default=None,
        help='write the table to PATH instead of stdout',
    )


def get_parser() -> argparse.ArgumentParser:
    """Get argument parser."""
    parser = argparse.ArgumentParser(
        description='Compute nonlocal curvatures of surfaces and fractional operators.',
    )
    parser.add_argument(
        '-j', '--threads', metavar='N', type=int,
        action=EnvDefaultOption, env_var=ENV_VAR_THREADS,
        default=DEFAULT_THREADS,
        help=(
            'maximum number of worker threads (default: %(default)s)'
        ),
    )
    parser.add_argument(
        '-c', '--config', metavar='PATH',
        action=EnvDefaultOption, env_var=ENV_VAR_CONFIG,
        default=None,
        help=(
            'JSON run configuration; command-line values override it'
        ),
    )
    parser.add_argument(
        '--reproducible',
        action=EnvDefaultStoreTrue, env_var=ENV_VAR_REPRODUCIBLE,
        default=False,
        help=(
            'omit the timestamp line from tables (default: %(default)s)'
        ),
    )
    output_options_group = parser.add_mutually_exclusive_group()
    output_options_group.add_argument(
        '-q', '--quiet',
        action=EnvDefaultStoreTrue, env_var=ENV_VAR_QUIET,
        default=False,
        help=(
            'quiet mode (only print results; simply exit with 0 or non-zero) '
            '(default: %(default)s)'
        ),
    )
    output_options_group.add_argument(
        '-v', '--verbose',
        action=EnvDefaultStoreTrue, env_var=ENV_VAR_VERBOSE,
        default=False,
        help=(
            'verbose mode (print out more information) (default: %(default)s)'
        ),
    )
    parser.add_argument(
        '--version',
        action='version',
        help='show version number and exit',
        version=f'nlcurv version {__version__}',
    )
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    curvature = subparsers.add_parser(
        'curvature', help='directional, mean and Gaussian curvatures and the curvature tensor')
    _add_scene_arguments(curvature)
    curvature.add_argument(
        '-p', '--point', metavar='X,Y[,Z]', action='append', dest='point', default=None,
        help='evaluation point, projected onto the surface; may be repeated',
    )
    curvature.add_argument(
        '--points', metavar='RULE', default=None,
        help="point sampling rule, 'grid-on-surface N'",
    )
    curvature.add_argument(
        '--representations', metavar='REP[,REP]', default=None,
        help=f"tensor representations among {', '.join(REPRESENTATIONS)}",
    )
    curvature.add_argument(
        '--extrapolate', action='store_true', default=None,
        help='add the σ → 1 limit of (1-σ)·curvature for each point (needs 3 orders)',
    )
    curvature.add_argument('--n-phi', type=int, default=None, help='angular nodes per half-plane')
    curvature.add_argument('--n-dir', type=int, default=None, help='tangent directions')
    curvature.add_argument('--n-polar', type=int, default=None, help='polar nodes of volume rays')
    curvature.add_argument('--tail-handling', choices=TAIL_HANDLING, default=None)
    curvature.add_argument('--angular-rule', choices=ANGULAR_RULES, default=None)
    curvature.add_argument('--pv-mode', choices=PV_MODES, default=None)
    curvature.add_argument(
        '--json', metavar='PATH', default=None,
        help='also write the full per-point reports as JSON',
    )

    perimeter = subparsers.add_parser(
        'perimeter', help='Monte-Carlo σ-area and σ-perimeter relative to a ball')
    _add_scene_arguments(perimeter)
    perimeter.add_argument(
        '--omega-radius', type=float, default=None,
        help='radius of the reference ball, twice the scene radius by default',
    )
    perimeter.add_argument('--samples', type=int, default=None, help='Monte-Carlo line count')
    perimeter.add_argument('--seed', type=int, default=None, help='random seed')

    fracops = subparsers.add_parser('fracops', help='apply a fractional operator to a field')
    fracops.add_argument('--operator', choices=FRACOPS_OPERATORS, default='laplacian')
    fracops.add_argument('--alpha', type=float, default=0.5, help='order (default: %(default)s)')
    fracops.add_argument(
        '--beta', type=float, default=0.5,
        help='inner order of the hessian and composition (default: %(default)s)',
    )
    fracops.add_argument('--dim', type=int, default=2, help='built-in field dimension')
    fracops.add_argument('--length', type=float, default=16.0, help='built-in field box side')
    fracops.add_argument('--count', type=int, default=128, help='built-in field nodes per axis')
    fracops.add_argument('--input', metavar='PATH', default=None, help='field file to read')
    fracops.add_argument('--output', metavar='PATH', default=None, help='field file to write')
    fracops.add_argument('--csv-slice', metavar='PATH', default=None,
                         help='write a 1-D or 2-D slice of the result as CSV')

    verify = subparsers.add_parser('verify', help='run acceptance suites')
    verify.add_argument(
        'suites', nargs='*', metavar='SUITE',
        help=f"suites among {', '.join(SUITES)} (default: all)",
    )
    verify.add_argument('--json', metavar='PATH', default=None,
                        help='write the JSON verdict to PATH instead of stdout')

    table = subparsers.add_parser('sphere-table', help='closed-form sphere curvatures')
    table.add_argument('--dims', default='2,3', help='dimensions (default: %(default)s)')
    table.add_argument('--radii', default='0.5,1,2', help='radii (default: %(default)s)')
    table.add_argument('--sigmas', default='0.25,0.5,0.75', help='orders (default: %(default)s)')
    table.add_argument('--csv', metavar='PATH', default=None, help='output file')
    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse arguments.

    :param argv: the arguments to use, or `None` for sys.argv
    :return: the parsed arguments
    """
    return get_parser().parse_args(argv)


class Options:
    """Simple container and utilities for options."""

    def __init__(self, parser: argparse.ArgumentParser) -> None:
        """Create using default argument values."""
        self.threads = parser.get_default('threads')
        self.config = parser.get_default('config')
        self.reproducible = parser.get_default('reproducible')
        self.quiet = parser.get_default('quiet')
        self.verbose = parser.get_default('verbose')

    def set_options(self, args: argparse.Namespace) -> None:
        """Set options using parsed arguments."""
        self.threads = args.threads
        self.config = args.config
        self.reproducible = args.reproducible
        self.quiet = args.quiet
        self.verbose = args.verbose
        # Shouldn't happen with a mutually exclusive group,
        # but can happen if one is set with an env var
        # and the other is set with an arg
        if self.quiet and self.verbose:
            # Similar message to what is printed when using args for both
            get_parser().print_usage()
            print("options '--quiet' and '--verbose' cannot both be true")
            sys.exit(EXIT_CONFIG_ERROR)
        if self.threads < 1:
            get_parser().print_usage()
            print(f"option '--threads' must be at least 1, got {self.threads}")
            sys.exit(EXIT_CONFIG_ERROR)

    def get_options(self) -> Dict[str, Any]:
        """Get all options as a dict."""
        return self.__dict__


options = Options(get_parser())


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Collect the run configuration values given on the command line.

    :param args: the parsed arguments of a scene command
    :return: the overrides for RunConfig.merged; None marks values not given
    """
    quadrature = {
        field: getattr(args, dest)
        for dest, field in QUADRATURE_FLAGS.items()
        if getattr(args, dest, None) is not None
    }
    overrides: Dict[str, Any] = {
        'scene': args.scene,
        'sigmas': parse_floats(args.sigmas, 'sigmas') if args.sigmas else None,
        'quadrature': quadrature,
        'outputs': {'csv': args.csv} if args.csv else None,
    }
    if args.command == 'curvature':
        if args.point:
            overrides['points'] = [parse_floats(p, 'point') for p in args.point]
        elif args.points:
            overrides['points'] = args.points
        if args.representations:
            overrides['representations'] = [
                r.strip() for r in args.representations.split(',') if r.strip()]
        overrides['extrapolate'] = args.extrapolate
        if args.json:
            overrides['outputs'] = {**(overrides['outputs'] or {}), 'json': args.json}
    return overrides


def run_command(args: argparse.Namespace) -> int:
    """
    Run the selected subcommand.

    :param args: the parsed arguments
    :return: the exit code
    """
    header = table_header(__version__, options.reproducible)
    if args.command == 'fracops':
        request = FracopsRequest(
            operator=args.operator,
            alpha=args.alpha,
            beta=args.beta,
            dim=args.dim,
            length=args.length,
            count=args.count,
            input_path=args.input,
            output_path=args.output,
            slice_path=args.csv_slice,
        )
        return cmd_fracops(request, header)
    if args.command == 'sphere-table':
        dims = [int(d) for d in parse_floats(args.dims, 'dims')]
        radii = parse_floats(args.radii, 'radii')
        sigmas = parse_floats(args.sigmas, 'sigmas')
        return cmd_sphere_table(dims, radii, sigmas, args.csv, header)

    config: RunConfig = load_config(options.config)
    if args.command == 'verify':
        suites = args.suites or config.verify or list(SUITES)
        unknown = [s for s in suites if s not in SUITES]
        if unknown:
            logger.print(f"unknown suite(s): {', '.join(unknown)}")
            return EXIT_CONFIG_ERROR
        return cmd_verify(suites, args.json, options.threads)
    config = config.merged(config_overrides(args))
    logger.verbose_print(f'Configuration: {config.to_dict()}')
    if args.command == 'perimeter':
        return cmd_perimeter(config, args.omega_radius, options.threads, header)
    return cmd_curvature(config, options.threads, header)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entrypoint.

    :param argv: the arguments to use, or `None` for sys.argv
    :return: 0 if successful, 1 on a numerical failure, 2 on a configuration error
    """
    args = parse_args(argv)
    options.set_options(args)
    logger.set_options(options)

    # Print options
    if options.verbose:
        logger.verbose_print('Options:')
        for name, value in options.get_options().items():
            logger.verbose_print(f'\t{name}: {str(value)}')
        logger.verbose_print()

    try:
        return run_command(args)
    except NlcurvError as e:
        logger.print(f'error: {e}')
        return e.exit_code


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
