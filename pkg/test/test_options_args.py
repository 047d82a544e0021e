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

import argparse
from io import StringIO
import os
import sys
import unittest
from unittest.mock import patch

from nlcurv.nlcurv import config_overrides
from nlcurv.nlcurv import get_parser
from nlcurv.nlcurv import Options
from nlcurv.nlcurv import parse_args


ENV_VARS = [
    'NLCURV_CONFIG',
    'NLCURV_QUIET',
    'NLCURV_REPRODUCIBLE',
    'NLCURV_THREADS',
    'NLCURV_VERBOSE',
]


class TestOptionsArgs(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def setUp(self) -> None:
        self.reset_environment()

    def tearDown(self) -> None:
        self.reset_environment()

    @staticmethod
    def reset_environment() -> None:
        for env_var in ENV_VARS:
            if env_var in os.environ:
                del os.environ[env_var]

    def test_parse_args(self) -> None:
        # To simply test the call itself
        test_argv = ['nlcurv/nlcurv.py', '-v', '-j', '4', 'sphere-table']
        with patch.object(sys, 'argv', test_argv):
            args = parse_args()
            self.assertEqual(True, args.verbose)
            self.assertEqual(4, args.threads)
            self.assertEqual('sphere-table', args.command)

        args = parse_args(['-q', 'curvature', '--scene', 'sphere:r=0.5', '--sigma', '0.5'])
        self.assertEqual(True, args.quiet)
        self.assertEqual('curvature', args.command)
        self.assertEqual('sphere:r=0.5', args.scene)
        self.assertEqual('0.5', args.sigmas)

    def test_sweep_sigma_alias(self) -> None:
        args = parse_args(['curvature', '--sweep-sigma', '0.9,0.95,0.99', '--extrapolate'])
        self.assertEqual('0.9,0.95,0.99', args.sigmas)
        self.assertEqual(True, args.extrapolate)

    def test_command_required(self) -> None:
        with patch('sys.stderr', new=StringIO()):
            with self.assertRaises(SystemExit):
                parse_args([])

    def test_options_basic(self) -> None:
        options = Options(get_parser())
        self.assertEqual(1, options.threads)
        self.assertEqual(False, options.reproducible)
        ns = argparse.Namespace(
            threads=3,
            config='run.json',
            reproducible=True,
            quiet=True,
            verbose=False,
        )
        options.set_options(ns)
        self.assertEqual(3, options.threads)
        self.assertEqual('run.json', options.config)
        self.assertEqual(True, options.reproducible)
        self.assertEqual(True, options.quiet)
        self.assertEqual(False, options.verbose)
        self.assertDictEqual(vars(ns), options.get_options())

    def test_args_default(self) -> None:
        # Set options through env vars
        os.environ['NLCURV_THREADS'] = '6'
        os.environ['NLCURV_CONFIG'] = 'from-env.json'
        os.environ['NLCURV_REPRODUCIBLE'] = ''
        os.environ['NLCURV_QUIET'] = 'True'
        args = parse_args(['sphere-table'])
        options = Options(get_parser())
        options.set_options(args)
        self.assertEqual(6, options.threads)
        self.assertEqual('from-env.json', options.config)
        self.assertEqual(True, options.reproducible)
        self.assertEqual(True, options.quiet)
        self.assertEqual(False, options.verbose)

        # Args override env vars
        args = parse_args(['-j', '2', '--config', 'from-args.json', 'sphere-table'])
        options.set_options(args)
        self.assertEqual(2, options.threads)
        self.assertEqual('from-args.json', options.config)

    def test_conflicting_options_exit(self) -> None:
        # Exits if both quiet and verbose are enabled
        os.environ['NLCURV_QUIET'] = 'True'
        args = parse_args(['--verbose', 'sphere-table'])
        options = Options(get_parser())
        with patch('sys.stdout', new=StringIO()) as fake_stdout:
            with self.assertRaises(SystemExit) as cm:
                options.set_options(args)
            self.assertIn('cannot both be true', fake_stdout.getvalue())
        self.assertEqual(2, cm.exception.code)

        self.reset_environment()
        os.environ['NLCURV_QUIET'] = ''
        os.environ['NLCURV_VERBOSE'] = 'anything means True, even empty'
        args = parse_args(['sphere-table'])
        with patch('sys.stdout', new=StringIO()):
            with self.assertRaises(SystemExit):
                options.set_options(args)

        # Exits if the thread count is not positive
        self.reset_environment()
        args = parse_args(['-j', '0', 'sphere-table'])
        with patch('sys.stdout', new=StringIO()):
            with self.assertRaises(SystemExit) as cm:
                options.set_options(args)
        self.assertEqual(2, cm.exception.code)

    def test_config_overrides(self) -> None:
        args = parse_args([
            'curvature', '--scene', 'torus:R=2,r=0.5', '--sigma', '0.25,0.5',
            '--point', '2.5,0,0', '--point', '1.5,0,0', '--n-phi', '64', '--representations',
            'angular,surface', '--csv', 'out.csv', '--json', 'out.json',
        ])
        overrides = config_overrides(args)
        self.assertEqual('torus:R=2,r=0.5', overrides['scene'])
        self.assertEqual([0.25, 0.5], overrides['sigmas'])
        self.assertEqual([[2.5, 0.0, 0.0], [1.5, 0.0, 0.0]], overrides['points'])
        self.assertEqual({'n_phi': 64}, overrides['quadrature'])
        self.assertEqual(['angular', 'surface'], overrides['representations'])
        self.assertEqual({'csv': 'out.csv', 'json': 'out.json'}, overrides['outputs'])
        self.assertIsNone(overrides['extrapolate'])

        args = parse_args(['perimeter', '--samples', '1000', '--seed', '7'])
        overrides = config_overrides(args)
        self.assertIsNone(overrides['scene'])
        self.assertIsNone(overrides['sigmas'])
        self.assertEqual({'mc_samples': 1000, 'rng_seed': 7}, overrides['quadrature'])
        self.assertNotIn('points', overrides)
