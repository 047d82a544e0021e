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

import math
import unittest

import mpmath
import numpy as np

from nlcurv.errors import SpecialFunctionError
from nlcurv.specfun import ball_volume_constant
from nlcurv.specfun import beta
from nlcurv.specfun import beta_numeric
from nlcurv.specfun import gamma
from nlcurv.specfun import mu_alpha
from nlcurv.specfun import nu_alpha
from nlcurv.specfun import sphere_measure_constant
from nlcurv.specfun import unit_ball_volume
from nlcurv.specfun import unit_sphere_measure


class TestSpecfun(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def test_gamma_values(self) -> None:
        self.assertAlmostEqual(math.sqrt(math.pi), gamma(0.5), places=14)
        self.assertAlmostEqual(24.0, gamma(5.0), places=12)
        self.assertAlmostEqual(-2.0 * math.sqrt(math.pi), gamma(-0.5), places=14)
        # Γ(-1.5) = 4√π/3
        self.assertAlmostEqual(4.0 * math.sqrt(math.pi) / 3.0, gamma(-1.5), places=13)

    def test_gamma_poles(self) -> None:
        for x in (0.0, -1.0, -2.0, -7.0):
            with self.assertRaises(SpecialFunctionError):
                gamma(x)

    def test_duplication(self) -> None:
        for x in np.linspace(0.05, 20.0, 200):
            lhs = gamma(x) * gamma(x + 0.5)
            rhs = 2.0 ** (1.0 - 2.0 * x) * math.sqrt(math.pi) * gamma(2.0 * x)
            self.assertLessEqual(abs(lhs - rhs) / abs(rhs), 1e-12)

    def test_reflection(self) -> None:
        for x in np.linspace(-0.45, 0.45, 91):
            value = gamma(0.5 - x) * gamma(0.5 + x) * math.cos(math.pi * x)
            self.assertLessEqual(abs(value - math.pi) / math.pi, 1e-12)

    def test_beta_values(self) -> None:
        self.assertAlmostEqual(math.pi, beta(0.5, 0.5), places=13)
        self.assertAlmostEqual(4.0, beta(0.25, 1.0), places=13)
        self.assertAlmostEqual(math.pi / 16.0, beta(1.5, 2.5), places=14)
        self.assertAlmostEqual(math.pi / 16.0, beta_numeric(1.5, 2.5), places=12)
        with self.assertRaises(SpecialFunctionError):
            beta(0.0, 1.0)
        with self.assertRaises(SpecialFunctionError):
            beta(1.0, -0.5)
        with self.assertRaises(ValueError):
            beta_numeric(1.0, 1.0, form='polar')

    def test_beta_symmetric_and_numeric(self) -> None:
        grid = np.linspace(0.1, 5.0, 10)
        for x in grid:
            for y in grid:
                value = beta(x, y)
                self.assertEqual(value, beta(y, x))
                self.assertLessEqual(abs(beta_numeric(x, y) - value) / value, 1e-10)

    def test_beta_trigonometric_form(self) -> None:
        for x, y in ((0.25, 1.0), (0.5, 0.5), (0.3, 2.7), (3.0, 0.2)):
            value = beta(x, y)
            self.assertLessEqual(abs(beta_numeric(x, y, form='trig') - value) / value, 1e-10)

    def test_sphere_and_ball_constants(self) -> None:
        self.assertAlmostEqual(2.0, sphere_measure_constant(2), places=14)
        self.assertAlmostEqual(2.0 * math.pi, sphere_measure_constant(3), places=14)
        self.assertAlmostEqual(math.pi, ball_volume_constant(3), places=14)
        self.assertAlmostEqual(4.0 * math.pi, unit_sphere_measure(2), places=14)
        self.assertAlmostEqual(4.0 * math.pi / 3.0, unit_ball_volume(3), places=14)
        for n in range(2, 7):
            self.assertAlmostEqual(
                (n - 1) * ball_volume_constant(n), sphere_measure_constant(n), places=12)
            self.assertAlmostEqual(
                math.pi ** (0.5 * (n - 1)) / gamma(0.5 * (n + 1)),
                ball_volume_constant(n),
                places=14,
            )

    def test_mu_alpha(self) -> None:
        self.assertAlmostEqual(1.0 / math.pi, mu_alpha(0.0, 1), places=14)
        self.assertAlmostEqual(1.0 / math.pi, mu_alpha(1e-12, 1), places=10)
        mpmath.mp.dps = 30
        expected = float(
            mpmath.sqrt(2) * mpmath.gamma(mpmath.mpf('1.75'))
            / (mpmath.pi * mpmath.gamma(mpmath.mpf('0.25')))
        )
        self.assertLessEqual(abs(mu_alpha(0.5, 2) - expected) / expected, 1e-13)
        for alpha in (0.1, 0.5, 0.9):
            for n in (1, 2, 3):
                self.assertGreater(mu_alpha(alpha, n), 0.0)
        with self.assertRaises(SpecialFunctionError):
            mu_alpha(1.0, 2)

    def test_nu_alpha(self) -> None:
        self.assertLess(nu_alpha(0.5, 2), 0.0)
        self.assertLess(nu_alpha(1.5, 3), 0.0)
        mpmath.mp.dps = 30
        expected = float(
            2 ** mpmath.mpf('0.6') * mpmath.gamma(mpmath.mpf('1.3'))
            / (mpmath.pi * mpmath.gamma(mpmath.mpf('-0.3')))
        )
        self.assertLessEqual(abs(nu_alpha(0.6, 2) - expected) / abs(expected), 1e-13)
        with self.assertRaises(SpecialFunctionError):
            nu_alpha(2.0, 2)
