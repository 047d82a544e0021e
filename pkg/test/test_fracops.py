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
import warnings

import numpy as np

from nlcurv.errors import ConfigError
from nlcurv.errors import PointNotOnSurface
from nlcurv.errors import UnsupportedDecay
from nlcurv.fieldio import Decay
from nlcurv.fieldio import gaussian_field
from nlcurv.fieldio import gaussian_laplacian_field
from nlcurv.fieldio import gaussian_vector_field
from nlcurv.fieldio import GridField
from nlcurv.fracops import central_mask
from nlcurv.fracops import divid_residual
from nlcurv.fracops import ewald_cutoff
from nlcurv.fracops import frac_divergence
from nlcurv.fracops import frac_gradient
from nlcurv.fracops import frac_hessian_direct
from nlcurv.fracops import frac_laplacian
from nlcurv.fracops import frac_laplacian_set_bridge
from nlcurv.fracops import gw_convolution_check
from nlcurv.fracops import gw_subordination_check
from nlcurv.fracops import hessian_kernel
from nlcurv.fracops import hessian_kernel_identity_check
from nlcurv.fracops import l2_relative
from nlcurv.fracops import sphere_monomial_integral
from nlcurv.fracops import taylor_indices
from nlcurv.oracle import spectral_frac_op
from nlcurv.oracle import sphere_k
from nlcurv.specfun import nu_alpha
from nlcurv.surface import SphereScene


class TestFracops(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def test_helpers(self) -> None:
        self.assertAlmostEqual(2.0 * math.pi, sphere_monomial_integral((0, 0)))
        self.assertAlmostEqual(math.pi, sphere_monomial_integral((2, 0)))
        self.assertEqual(0.0, sphere_monomial_integral((1, 0)))
        self.assertAlmostEqual(4.0 * math.pi, sphere_monomial_integral((0, 0, 0)))
        self.assertAlmostEqual(4.0 * math.pi / 3.0, sphere_monomial_integral((0, 0, 2)))

        self.assertEqual(1.0, float(ewald_cutoff(0.0, 1.0, 1.5)))
        self.assertLess(float(ewald_cutoff(10.0, 1.0, 1.5)), 1e-40)

        self.assertEqual([(1,), (2,), (3,), (4,), (5,)], taylor_indices(1))
        self.assertEqual(20, len(taylor_indices(2)))

        field = gaussian_field(2, 8.0, 16)
        mask = central_mask(field)
        # |x| <= 2 keeps 9 of the 16 nodes per axis
        self.assertEqual(81, int(mask.sum()))

    def test_laplacian_matches_spectral(self) -> None:
        field = gaussian_field(1, 32.0, 256)
        lap = frac_laplacian(field, 0.6)
        self.assertEqual('algebraic', lap.decay.kind)
        self.assertAlmostEqual(1.6, lap.decay.scale)
        self.assertLess(l2_relative(lap, spectral_frac_op(field, 'laplacian', 0.6)), 1e-3)
        self.assertEqual(0.0, l2_relative(lap, lap))

    def test_gradient_matches_spectral(self) -> None:
        field = gaussian_field(1, 32.0, 256)
        grad = frac_gradient(field, 0.4)
        self.assertEqual((256, 1), grad.values.shape)
        self.assertLess(l2_relative(grad, spectral_frac_op(field, 'gradient', 0.4)), 1e-3)
        # The gradient of an even function is odd
        np.testing.assert_allclose(grad.values[1:129, 0], -grad.values[255:127:-1, 0],
                                   atol=1e-8 * float(np.max(np.abs(grad.values))))

    def test_gradient_trace_is_divergence(self) -> None:
        w = gaussian_vector_field(2, 16.0, 64, [[0.3, 0.0], [0.0, -0.2]])
        grad = frac_gradient(w, 0.4)
        self.assertEqual((64, 64, 2, 2), grad.values.shape)
        div = frac_divergence(w, 0.4)
        self.assertEqual((64, 64), div.values.shape)
        trace = grad.values[..., 0, 0] + grad.values[..., 1, 1]
        np.testing.assert_allclose(div.values, trace,
                                   atol=1e-12 * float(np.max(np.abs(div.values))))

    def test_vector_operators_match_spectral_in_2d(self) -> None:
        field = gaussian_field(2, 16.0, 128)
        w = gaussian_vector_field(2, 16.0, 128, 0.25 * np.eye(2))
        for alpha in (0.4, 0.8):
            with self.subTest(alpha=alpha):
                grad = frac_gradient(field, alpha)
                self.assertLess(
                    l2_relative(grad, spectral_frac_op(field, 'gradient', alpha)), 1e-3)
                div = frac_divergence(w, alpha)
                self.assertLess(
                    l2_relative(div, spectral_frac_op(w, 'divergence', alpha)), 1e-3)

    def test_divergence_of_gradient(self) -> None:
        fields = (gaussian_field(1, 32.0, 256), gaussian_field(2, 16.0, 128))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            for field in fields:
                for alpha, beta in ((0.3, 0.3), (0.3, 0.5), (0.5, 0.3)):
                    with self.subTest(dim=field.dim, alpha=alpha, beta=beta):
                        self.assertLess(divid_residual(field, alpha, beta), 1e-2)

    def test_divergence_of_gradient_is_not_plus_laplacian(self) -> None:
        field = gaussian_field(1, 32.0, 256)
        composed = frac_divergence(frac_gradient(field, 0.4), 0.3)
        lap = frac_laplacian(field, 0.7)
        self.assertGreater(l2_relative(composed, lap), 1.0)

    def test_divergence_of_gradient_converges(self) -> None:
        residuals = []
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            for count in (64, 128):
                field = gaussian_laplacian_field(1, 64.0, count, width=2.0)
                residuals.append(divid_residual(field, 0.3, 0.3))
        self.assertGreater(residuals[0], 0.0)
        self.assertLess(residuals[1] / residuals[0], 0.5)

    def test_hessian_direct(self) -> None:
        field = gaussian_field(2, 16.0, 64)
        hessian = frac_hessian_direct(field, 0.3, 0.3)
        self.assertEqual((64, 64, 2, 2), hessian.values.shape)
        np.testing.assert_array_equal(hessian.values[..., 0, 1], hessian.values[..., 1, 0])
        # Minus the trace is the fractional Laplacian of order α+β
        trace = hessian.with_values(-np.trace(hessian.values, axis1=-2, axis2=-1))
        self.assertLess(l2_relative(trace, frac_laplacian(field, 0.6)), 1e-2)

    def test_order_and_decay_errors(self) -> None:
        field = gaussian_field(1, 16.0, 64)
        for alpha in (0.0, 1.0):
            with self.assertRaises(ConfigError) as cm:
                frac_gradient(field, alpha)
            self.assertEqual('alpha', cm.exception.field)
        with self.assertRaises(ConfigError):
            frac_laplacian(field, 2.0)
        with self.assertRaises(ConfigError) as cm:
            frac_hessian_direct(field, 0.3, 1.2)
        self.assertEqual('beta', cm.exception.field)
        with self.assertRaises(ConfigError):
            frac_divergence(field, 0.5)
        slow = GridField(values=field.values, length=16.0, dim=1,
                         decay=Decay('algebraic', 0.5))
        with self.assertRaises(UnsupportedDecay):
            frac_laplacian(slow, 0.5)
        wide = GridField(values=field.values, length=16.0, dim=1,
                         decay=Decay('compact', 20.0))
        with self.assertRaises(UnsupportedDecay):
            frac_gradient(wide, 0.5)

    def test_hessian_kernel(self) -> None:
        v = np.array([1.0, 2.0])
        kernel = hessian_kernel(v, 0.3, 0.4)
        r = float(np.linalg.norm(v))
        self.assertAlmostEqual(-nu_alpha(0.7, 2) * r ** -2.7, kernel.trace())
        np.testing.assert_allclose(kernel.matrix, kernel.matrix.T)
        with self.assertRaises(ConfigError):
            hessian_kernel([0.0, 0.0], 0.3, 0.4)

    def test_kernel_identity(self) -> None:
        result = hessian_kernel_identity_check([1.0, 0.0], 0.3, 0.3)
        self.assertLess(result.rel_err, 1e-3)
        self.assertGreater(result.resolution, 1)
        with self.assertRaises(ConfigError):
            hessian_kernel_identity_check([1.0], 0.3, 0.3)
        with self.assertRaises(ConfigError):
            hessian_kernel_identity_check([0.0, 0.0], 0.3, 0.3)

    def test_heat_kernel_checks(self) -> None:
        for gamma_index, v in (((0, 0), (0.0, 0.0)), ((1, 0), (2.0, 0.0)),
                               ((1, 1), (1.0, 2.0)), ((0, 2), (1.0, -1.0))):
            check = gw_convolution_check(gamma_index, 1.0, 1.0, v)
            self.assertLess(check.relative_error, 1e-6, msg=str(gamma_index))
        # Without the diagonal term the γ = 2e_i closed form is off
        check = gw_convolution_check((2, 0), 1.0, 1.0, (2.0, 0.0), diagonal_term=False)
        self.assertGreater(check.relative_error, 0.1)
        with self.assertRaises(ConfigError):
            gw_convolution_check((2, 1), 1.0, 1.0, (0.0, 0.0))
        with self.assertRaises(ConfigError):
            gw_convolution_check((0, 0), 0.0, 1.0, (0.0, 0.0))
        self.assertLess(gw_subordination_check(0.5, (1.0, 0.0)).relative_error, 1e-8)
        self.assertLess(gw_subordination_check(0.25, (0.3, 0.4, 1.2)).relative_error, 1e-8)

    def test_set_bridge(self) -> None:
        circle = SphereScene(np.zeros(2), 1.0)
        values = frac_laplacian_set_bridge(circle, [[1.0, 0.0], [0.0, -1.0]], 0.3, 1.0 / 128, 2.5)
        expected = sphere_k(2, 1.0, 0.3)
        for value in values:
            self.assertLess(abs(value / expected - 1.0), 5e-2)
        with self.assertRaises(ConfigError):
            frac_laplacian_set_bridge(circle, [[1.0, 0.0]], 0.3, 3.0, 2.5)
        with self.assertRaises(PointNotOnSurface):
            frac_laplacian_set_bridge(circle, [[0.5, 0.0]], 0.3, 0.25, 2.5)
