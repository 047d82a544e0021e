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

from nlcurv.errors import ConfigError
from nlcurv.errors import PeriodizationError
from nlcurv.fieldio import constant_field
from nlcurv.fieldio import gaussian_field
from nlcurv.fieldio import gaussian_vector_field
from nlcurv.oracle import sphere_classical_k
from nlcurv.oracle import sphere_geometry
from nlcurv.oracle import sphere_H
from nlcurv.oracle import sphere_k
from nlcurv.oracle import sphere_L
from nlcurv.oracle import SphereOracle
from nlcurv.oracle import spectral_frac_op
from nlcurv.surface import frame_from_normal


class TestOracle(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def test_sphere_k(self) -> None:
        for sigma in (0.25, 0.5, 0.75):
            for radius in (0.5, 2.0):
                # B(a, 1) = 1/a
                expected = -2.0 / ((1.0 - sigma) * sigma * (2.0 * radius) ** sigma)
                self.assertAlmostEqual(1.0, sphere_k(3, radius, sigma) / expected, places=12)
                expected = -float(mpmath.beta(0.5 * (1.0 - sigma), 0.5)) / (
                    sigma * (2.0 * radius) ** sigma)
                self.assertAlmostEqual(1.0, sphere_k(2, radius, sigma) / expected, places=12)
        self.assertEqual(sphere_k(4, 1.0, 0.5), sphere_H(4, 1.0, 0.5))
        # Larger spheres are flatter
        self.assertLess(sphere_k(3, 0.5, 0.5), sphere_k(3, 2.0, 0.5))
        self.assertEqual(-0.5, sphere_classical_k(2.0))

    def test_sphere_errors(self) -> None:
        for args, path in (((1, 1.0, 0.5), 'n'), ((3, 0.0, 0.5), 'radius'),
                           ((3, 1.0, 1.0), 'sigma'), ((3, 1.0, 0.0), 'sigma')):
            with self.assertRaises(ConfigError) as cm:
                sphere_k(*args)
            self.assertEqual(path, cm.exception.field)
        with self.assertRaises(ConfigError):
            sphere_classical_k(-1.0)
        with self.assertRaises(ConfigError):
            SphereOracle(3, 1.0, 1.5)

    def test_sphere_tensor(self) -> None:
        k = sphere_k(3, 1.0, 0.5)
        tensor = sphere_L(3, 1.0, 0.5)
        np.testing.assert_array_equal([0.0, 0.0, 1.0], tensor.frame.normal)
        np.testing.assert_array_equal([0.0, 0.0, 1.0], tensor.frame.z)
        np.testing.assert_array_equal(k * np.eye(2), tensor.matrix)
        frame = frame_from_normal(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        self.assertIs(frame, sphere_L(3, 1.0, 0.5, frame).frame)

        oracle = SphereOracle(3, 1.0, 0.5)
        self.assertEqual(k, oracle.k())
        self.assertAlmostEqual(k * k, oracle.gaussian())
        self.assertEqual(-1.0, oracle.classical_k())
        np.testing.assert_array_equal(tensor.matrix, oracle.tensor().matrix)

    def test_sphere_geometry(self) -> None:
        p, phi = sphere_geometry(1.0, 1.0)
        np.testing.assert_allclose([math.sqrt(0.75), -0.5], p)
        self.assertAlmostEqual(1.0, float(np.linalg.norm(p)))
        # p lies on the circle through z with center -ρ·n(z)
        self.assertAlmostEqual(1.0, float(np.hypot(p[0], p[1] + 1.0)))
        self.assertAlmostEqual(2.0 * math.pi / 3.0, phi)
        with self.assertRaises(ConfigError) as cm:
            sphere_geometry(2.5, 1.0)
        self.assertEqual('r', cm.exception.field)

    def test_spectral_integer_orders(self) -> None:
        field = gaussian_field(1, 16.0, 128)
        x = field.axis()
        gauss = np.exp(-math.pi * x * x)
        # Order 2 is -f''; order 1 of the gradient is f'
        lap = spectral_frac_op(field, 'laplacian', 2.0)
        np.testing.assert_allclose(
            (2.0 * math.pi - 4.0 * math.pi ** 2 * x * x) * gauss, lap.values, atol=1e-9)
        grad = spectral_frac_op(field, 'gradient', 1.0)
        self.assertEqual((128, 1), grad.values.shape)
        np.testing.assert_allclose(-2.0 * math.pi * x * gauss, grad.values[:, 0], atol=1e-9)

        vector = gaussian_vector_field(2, 8.0, 64, np.zeros((2, 2)))
        coords = vector.coordinates()
        g = np.exp(-math.pi * np.sum(coords ** 2, axis=-1))
        div = spectral_frac_op(vector, 'divergence', 1.0)
        expected = -2.0 * math.pi * (coords[..., 0] + coords[..., 1]) * g
        np.testing.assert_allclose(expected, div.values, atol=1e-9)

    def test_spectral_fractional_order(self) -> None:
        alpha = 0.6
        field = gaussian_field(1, 32.0, 256)
        lap = spectral_frac_op(field, 'laplacian', alpha)
        # ∫ |2πξ|^α exp(-πξ²) dξ at the origin
        expected = (2.0 * math.pi) ** alpha * math.gamma(0.5 * (alpha + 1.0)) / math.pi ** (
            0.5 * (alpha + 1.0))
        self.assertAlmostEqual(1.0, lap.values[128] / expected, delta=1e-3)
        zero = spectral_frac_op(constant_field(1, 8.0, 16, 2.0), 'laplacian', alpha)
        np.testing.assert_array_equal(np.zeros(16), zero.values)

    def test_spectral_errors(self) -> None:
        field = gaussian_field(1, 16.0, 64)
        with self.assertRaises(ConfigError) as cm:
            spectral_frac_op(field, 'curl', 1.0)
        self.assertEqual('operator', cm.exception.field)
        with self.assertRaises(ConfigError):
            spectral_frac_op(field, 'laplacian', 1.0, pad=0)
        with self.assertRaises(ConfigError):
            spectral_frac_op(field, 'divergence', 1.0)
        wide = gaussian_field(1, 4.0, 32, width=2.0)
        with self.assertRaises(PeriodizationError):
            spectral_frac_op(wide, 'laplacian', 1.0)
        spectral_frac_op(wide, 'laplacian', 1.0, check_boundary=False)
