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

import numpy as np

from nlcurv.errors import ConfigError
from nlcurv.perimeter import Ball
from nlcurv.perimeter import combine
from nlcurv.perimeter import CrossingParity
from nlcurv.perimeter import Estimate
from nlcurv.perimeter import HalfSpace
from nlcurv.perimeter import interval_energy
from nlcurv.perimeter import line_energy
from nlcurv.perimeter import line_integral
from nlcurv.perimeter import mc_double_integral
from nlcurv.perimeter import sigma_area
from nlcurv.perimeter import sigma_perimeter
from nlcurv.perimeter import Steps
from nlcurv.quadrature import QuadratureSpec
from nlcurv.surface import PlaneScene
from nlcurv.surface import SphereScene


def steps(*breaks: float, start: bool = False) -> Steps:
    """Build the step function of a single line."""
    return Steps(np.array([breaks], dtype=float), np.array([start]), np.array([False]))


class TestPerimeter(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def test_interval_energy(self) -> None:
        def energy(a: float, b: float, c: float, d: float) -> float:
            return float(interval_energy(
                np.array([a]), np.array([b]), np.array([c]), np.array([d]), 0.5)[0])

        # P(x) = 4√x for σ = 1/2
        self.assertAlmostEqual(
            8.0 * math.sqrt(2.0) - 4.0 - 4.0 * math.sqrt(3.0), energy(0.0, 1.0, 2.0, 3.0))
        self.assertAlmostEqual(4.0 * math.sqrt(2.0) - 4.0, energy(0.0, 1.0, 2.0, math.inf))
        self.assertAlmostEqual(4.0 * math.sqrt(2.0) - 4.0, energy(-math.inf, 0.0, 1.0, 2.0))
        self.assertEqual(math.inf, energy(-math.inf, 0.0, 1.0, math.inf))

    def test_line_integral_matches_pair_integral(self) -> None:
        # Lines see chord²; ∫∫ |x−y|^{-1} over the unit disk squared is 16π/3 and α_1 = 2
        def chord_squared(origins: np.ndarray, dirs: np.ndarray):
            along = np.sum(origins * dirs, axis=1)
            dist2 = np.sum(origins * origins, axis=1) - along ** 2
            values = 4.0 * np.clip(1.0 - dist2, 0.0, None)
            return values, np.zeros(len(values), dtype=bool)

        spec = QuadratureSpec(mc_samples=4096, rng_seed=3)
        estimate = line_integral(chord_squared, np.zeros(2), 1.0, 2, spec)
        self.assertEqual(4096, estimate.samples)
        self.assertTrue(estimate.agrees(Estimate(8.0 * math.pi / 3.0, 0.0, 0), k=4.0))
        self.assertLess(estimate.std_error, 0.05 * estimate.value)

    def test_segments(self) -> None:
        lo, hi, inside = steps(1.0, 2.0).segments()
        np.testing.assert_array_equal([[-math.inf, 1.0, 2.0]], lo)
        np.testing.assert_array_equal([[1.0, 2.0, math.inf]], hi)
        np.testing.assert_array_equal([[False, True, False]], inside)
        _, _, inside = steps(1.0, 2.0, start=True).segments()
        np.testing.assert_array_equal([[True, False, True]], inside)

    def test_combine(self) -> None:
        a = steps(0.0, 2.0)
        b = steps(1.0, 3.0)
        np.testing.assert_array_equal([[0.0, 3.0]], combine(a, b, np.logical_or).breaks)
        np.testing.assert_array_equal([[1.0, 2.0]], combine(a, b, np.logical_and).breaks)
        disjoint = combine(steps(0.0, 1.0), steps(2.0, 3.0), np.logical_and)
        self.assertEqual((1, 0), disjoint.breaks.shape)
        self.assertFalse(disjoint.start[0])

    def test_regions(self) -> None:
        origins = np.zeros((1, 2))
        dirs = np.array([[1.0, 0.0]])
        ball = Ball([0.0, 0.0], 1.0)
        np.testing.assert_allclose([[-1.0, 1.0]], ball.steps(origins, dirs).breaks)
        half = HalfSpace([0.5, 0.0], [1.0, 0.0])
        s = half.steps(origins, dirs)
        np.testing.assert_allclose([[0.5]], s.breaks)
        self.assertTrue(s.start[0])
        np.testing.assert_allclose([[-1.0, 0.5]], (ball & half).steps(origins, dirs).breaks)
        np.testing.assert_allclose([[0.5, 1.0]], (ball - half).steps(origins, dirs).breaks)
        self.assertTrue((~ball).steps(origins, dirs).start[0])

        union = (ball | Ball([3.0, 0.0], 1.0)).bounding_ball()
        assert union is not None
        center, radius = union
        np.testing.assert_allclose([1.5, 0.0], center)
        self.assertAlmostEqual(2.5, radius)
        self.assertIsNone((ball | half).bounding_ball())
        bounded = (ball & half).bounding_ball()
        assert bounded is not None
        self.assertEqual(1.0, bounded[1])

        circle = CrossingParity(SphereScene(np.zeros(2), 1.0))
        np.testing.assert_allclose([[-1.0, 1.0]], circle.steps(origins, dirs).breaks)

    def test_region_errors(self) -> None:
        with self.assertRaises(ConfigError):
            Ball([0.0, 0.0], 0.0)
        with self.assertRaises(ConfigError):
            Ball([0.0, 0.0], 1.0) & Ball([0.0, 0.0, 0.0], 1.0)
        with self.assertRaises(ConfigError) as cm:
            CrossingParity(PlaneScene(np.zeros(3), [0.0, 0.0, 1.0]))
        self.assertEqual('scene', cm.exception.field)
        ball = Ball([0.0, 0.0], 1.0)
        with self.assertRaises(ConfigError):
            line_energy(ball.steps(np.zeros((1, 2)), np.array([[1.0, 0.0]])),
                        ball.steps(np.zeros((1, 2)), np.array([[1.0, 0.0]])), 0.5)
        half = HalfSpace([0.0, 0.0], [1.0, 0.0])
        with self.assertRaises(ConfigError):
            mc_double_integral(half, ~half, 0.5, QuadratureSpec(mc_samples=64))

    def test_estimate(self) -> None:
        a = Estimate(value=1.0, std_error=0.1, samples=100)
        self.assertTrue(a.agrees(Estimate(1.3, 0.1, 100)))
        self.assertFalse(a.agrees(Estimate(1.5, 0.1, 100)))
        self.assertTrue(a.agrees(Estimate(1.5, 0.1, 100), k=4.0))

    def test_area_equals_perimeter_on_same_lines(self) -> None:
        spec = QuadratureSpec(mc_samples=512, rng_seed=7)
        origin = np.zeros(2)
        # The same seed and bounding ball give the same lines, and the pair sets coincide
        area = sigma_area(SphereScene(origin, 1.0), Ball(origin, 2.0), 0.5, spec)
        per = sigma_perimeter(Ball(origin, 1.0), Ball(origin, 2.0), 0.5, spec)
        self.assertEqual(512, per.samples)
        self.assertGreater(per.value, 0.0)
        self.assertGreater(per.std_error, 0.0)
        self.assertAlmostEqual(1.0, area.value / per.value, places=8)

    def test_perimeter_scaling_on_same_lines(self) -> None:
        # Scaled bounds map the sampled lines onto each other
        spec = QuadratureSpec(mc_samples=256, rng_seed=1)
        n, sigma = 3, 0.5
        origin = np.zeros(n)
        per = sigma_perimeter(Ball(origin, 1.0), Ball(origin, 2.0), sigma, spec)
        per2 = sigma_perimeter(Ball(origin, 2.0), Ball(origin, 4.0), sigma, spec)
        self.assertAlmostEqual(2.0 ** (n - sigma), per2.value / per.value, places=8)

    def test_area_equals_perimeter_independently(self) -> None:
        origin = np.zeros(2)
        area = sigma_area(SphereScene(origin, 1.0), Ball(origin, 2.0), 0.5,
                          QuadratureSpec(mc_samples=2048, rng_seed=11))
        per = sigma_perimeter(Ball(origin, 1.0), Ball(origin, 2.0), 0.5,
                              QuadratureSpec(mc_samples=2048, rng_seed=12))
        self.assertNotEqual(area.value, per.value)
        self.assertTrue(area.agrees(per, k=4.0))

    def test_scaling_independently(self) -> None:
        n, sigma = 2, 0.5
        origin = np.zeros(n)
        factor = 2.0 ** (n - sigma)

        def spec(seed: int) -> QuadratureSpec:
            return QuadratureSpec(mc_samples=2048, rng_seed=seed)

        area = sigma_area(SphereScene(origin, 1.0), Ball(origin, 2.0), sigma, spec(21))
        area2 = sigma_area(SphereScene(origin, 2.0), Ball(origin, 4.0), sigma, spec(22))
        per = sigma_perimeter(Ball(origin, 1.0), Ball(origin, 2.0), sigma, spec(23))
        per2 = sigma_perimeter(Ball(origin, 2.0), Ball(origin, 4.0), sigma, spec(24))
        for small, large in ((area, area2), (per, per2)):
            scaled = Estimate(factor * small.value, factor * small.std_error, small.samples)
            self.assertTrue(large.agrees(scaled, k=4.0))

    def test_threads_do_not_change_results(self) -> None:
        spec = QuadratureSpec(mc_samples=256, rng_seed=5)
        origin = np.zeros(2)
        one = mc_double_integral(Ball(origin, 1.0), Ball(origin, 2.0) - Ball(origin, 1.5),
                                 0.5, spec, bounds=(origin, 2.0))
        many = mc_double_integral(Ball(origin, 1.0), Ball(origin, 2.0) - Ball(origin, 1.5),
                                  0.5, spec, bounds=(origin, 2.0), threads=4)
        self.assertEqual(one, many)
        self.assertGreater(one.value, 0.0)
