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

import unittest

import numpy as np

from nlcurv.errors import DegenerateProjection
from nlcurv.errors import EndpointOnSurface
from nlcurv.errors import PointNotOnSurface
from nlcurv.errors import SceneError
from nlcurv.errors import TangencyDetected
from nlcurv.surface import as_points
from nlcurv.surface import bump_scene
from nlcurv.surface import classify
from nlcurv.surface import classify_points
from nlcurv.surface import crossings
from nlcurv.surface import frame_from_normal
from nlcurv.surface import implicit_sphere_scene
from nlcurv.surface import pack_hits
from nlcurv.surface import PlaneScene
from nlcurv.surface import project_to_tangent
from nlcurv.surface import QuadraticGraphScene
from nlcurv.surface import segment_parity
from nlcurv.surface import SphereScene
from nlcurv.surface import SymTangentTensor
from nlcurv.surface import tangent_frame
from nlcurv.surface import torus_scene


class TestSurface(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def setUp(self) -> None:
        self.sphere = SphereScene(np.zeros(3), 1.0)

    def test_sphere_crossings(self) -> None:
        c = crossings(self.sphere, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 10.0)
        np.testing.assert_allclose([1.0], c.t)
        c = crossings(self.sphere, [-3.0, 0.0, 0.0], [1.0, 0.0, 0.0], 10.0)
        np.testing.assert_allclose([2.0, 4.0], c.t)
        c = crossings(self.sphere, [-3.0, 0.0, 0.0], [1.0, 0.0, 0.0], 3.0)
        np.testing.assert_allclose([2.0], c.t)
        # The base point's own crossing is excluded
        c = crossings(self.sphere, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 10.0)
        np.testing.assert_allclose([2.0], c.t)
        c = crossings(self.sphere, [-3.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 10.0)
        self.assertEqual(0, len(c.t))

    def test_crossing_errors(self) -> None:
        with self.assertRaises(TangencyDetected):
            crossings(self.sphere, [-3.0, 1.0, 0.0], [1.0, 0.0, 0.0], 10.0)
        with self.assertRaises(SceneError):
            crossings(self.sphere, [0.0, 0.0, 0.0], [2.0, 0.0, 0.0], 10.0)
        with self.assertRaises(SceneError):
            crossings(self.sphere, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.0)

    def test_torus_crossings(self) -> None:
        torus = torus_scene(2.0, 0.5)
        c = crossings(torus, [-4.0, 0.0, 0.3], [1.0, 0.0, 0.0], 8.0)
        np.testing.assert_allclose([1.6, 2.4, 5.6, 6.4], c.t, atol=1e-9)
        self.assertTrue(torus.contains([2.0, 0.0, 0.0])[0])
        self.assertFalse(torus.contains([0.0, 0.0, 0.0])[0])
        self.assertTrue(torus.on_surface([2.5, 0.0, 0.0]))
        np.testing.assert_allclose([1.0, 0.0, 0.0], torus.normal([2.5, 0.0, 0.0]), atol=1e-12)
        np.testing.assert_allclose([-1.0, 0.0, 0.0], torus.normal([1.5, 0.0, 0.0]), atol=1e-12)

    def test_implicit_sphere_matches_sphere(self) -> None:
        implicit = implicit_sphere_scene(1.0)
        origins = np.array([[-3.0, 0.2, 0.1], [0.0, 0.0, 0.0], [0.5, -2.0, 0.3]])
        dirs = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.0, 1.0, 0.0]])
        exact = self.sphere.ray_hits(origins, dirs, 10.0)
        marched = implicit.ray_hits(origins, dirs, 10.0)
        np.testing.assert_array_equal(exact.count, marched.count)
        np.testing.assert_allclose(exact.t, marched.t, atol=1e-9)

    def test_graph_and_plane(self) -> None:
        graph = QuadraticGraphScene((1.0, 2.0))
        self.assertEqual(3, graph.dim)
        self.assertIsNone(graph.bounding_ball())
        c = crossings(graph, [0.0, 0.0, 1.0], [0.0, 0.0, -1.0], 10.0)
        np.testing.assert_allclose([1.0], c.t)
        np.testing.assert_allclose([0.0, 0.0, 1.0], graph.normal([0.0, 0.0, 0.0]))
        p = graph.project([1.0, 0.0, 0.6])
        self.assertTrue(graph.on_surface(p))

        plane = PlaneScene(np.zeros(3), np.array([0.0, 0.0, 2.0]))
        np.testing.assert_allclose([0.0, 0.0, 1.0], plane.unit_normal)
        c = crossings(plane, [0.0, 0.0, 1.0], [0.0, 0.6, -0.8], 10.0)
        np.testing.assert_allclose([1.25], c.t)
        with self.assertRaises(TangencyDetected):
            crossings(plane, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 10.0)

    def test_bump(self) -> None:
        bump = bump_scene(0.5, 1.0)
        self.assertFalse(bump.closed)
        self.assertIsNone(bump.bounding_ball())
        c = crossings(bump, [0.0, 0.0, 2.0], [0.0, 0.0, -1.0], 10.0)
        np.testing.assert_allclose([1.5], c.t, atol=1e-9)
        # Far from the bump, the plane z = 0
        c = crossings(bump, [20.0, 0.0, 1.0], [0.0, 0.0, -1.0], 10.0)
        np.testing.assert_allclose([1.0], c.t, atol=1e-12)

    def test_segment_parity(self) -> None:
        self.assertEqual(1, segment_parity(self.sphere, [0.0, 0.0, 0.0], [2.0, 0.0, 0.0]))
        self.assertEqual(0, segment_parity(self.sphere, [-2.0, 0.0, 0.1], [2.0, 0.0, 0.1]))
        self.assertEqual(0, segment_parity(self.sphere, [0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]))
        with self.assertRaises(EndpointOnSurface):
            segment_parity(self.sphere, [1.0, 0.0, 0.0], [2.0, 0.0, 0.0])
        with self.assertRaises(SceneError):
            segment_parity(self.sphere, [2.0, 0.0, 0.0], [2.0, 0.0, 0.0])

    def test_classifier(self) -> None:
        z = np.array([0.0, 0.0, 1.0])
        n = self.sphere.normal(z)
        np.testing.assert_allclose([0.0, 0.0, 1.0], n)
        # Inside the ball, outside above it, and outside beyond the far side
        self.assertEqual(1, classify(self.sphere, z, n, [0.0, 0.0, 0.0]))
        self.assertEqual(-1, classify(self.sphere, z, n, [0.0, 0.0, 3.0]))
        self.assertEqual(-1, classify(self.sphere, z, n, [0.0, 0.0, -3.0]))
        ys = np.array([[0.3, 0.2, 0.5], [3.0, 0.0, 0.5], [0.0, 0.5, 1.5]])
        np.testing.assert_array_equal([1, -1, -1], classify_points(self.sphere, z, n, ys))
        # Matches membership in the ball below the tangent plane
        rng = np.random.default_rng(1)
        pts = rng.uniform(-2.0, 2.0, (200, 3))
        pts = pts[np.abs(pts[:, 2] - 1.0) > 1e-3]
        values = classify_points(self.sphere, z, n, pts)
        expected = np.where(self.sphere.contains(pts), 1, -1)
        np.testing.assert_array_equal(expected, values)

        plane = PlaneScene(np.zeros(3), np.array([0.0, 0.0, 1.0]))
        origin = np.zeros(3)
        self.assertEqual(1, classify(plane, origin, plane.normal(origin), [0.3, 0.2, -1.0]))
        self.assertEqual(-1, classify(plane, origin, plane.normal(origin), [0.3, 0.2, 1.0]))

    def test_tangent_frame(self) -> None:
        z = np.array([0.6, 0.0, 0.8])
        frame = tangent_frame(self.sphere, z)
        np.testing.assert_allclose(z, frame.normal)
        np.testing.assert_allclose(np.eye(2), frame.tangents @ frame.tangents.T, atol=1e-14)
        np.testing.assert_allclose([0.0, 0.0], frame.tangents @ frame.normal, atol=1e-14)
        v = frame.ambient([0.3, -0.4])
        np.testing.assert_allclose([0.3, -0.4], frame.tangent_coordinates(v))
        # Deterministic
        again = tangent_frame(self.sphere, z)
        np.testing.assert_array_equal(frame.tangents, again.tangents)
        with self.assertRaises(PointNotOnSurface):
            tangent_frame(self.sphere, [0.5, 0.0, 0.0])
        with self.assertRaises(PointNotOnSurface):
            self.sphere.project([0.0, 0.0, 0.0])

    def test_project_to_tangent(self) -> None:
        z = np.array([0.0, 0.0, 1.0])
        frame = frame_from_normal(z, np.array([0.0, 0.0, 1.0]))
        y_prime, e, rho, h = project_to_tangent(z, frame, [2.0, 0.0, 4.0])
        np.testing.assert_allclose([2.0, 0.0, 1.0], y_prime)
        np.testing.assert_allclose([1.0, 0.0, 0.0], e)
        self.assertEqual(2.0, rho)
        self.assertEqual(3.0, h)
        with self.assertRaises(DegenerateProjection):
            project_to_tangent(z, frame, [0.0, 0.0, -1.0])

    def test_sym_tangent_tensor(self) -> None:
        frame = frame_from_normal(np.zeros(3), np.array([0.0, 0.0, 1.0]))
        tensor = SymTangentTensor.symmetrized(frame, [[1.0, 0.5], [0.3, 2.0]])
        np.testing.assert_allclose([[1.0, 0.4], [0.4, 2.0]], tensor.matrix)
        self.assertAlmostEqual(0.2, tensor.asymmetry)
        self.assertEqual(3.0, tensor.trace())
        self.assertAlmostEqual(1.84, tensor.determinant())
        np.testing.assert_allclose([0.0, 0.0, 0.0], tensor.ambient() @ frame.normal)
        angle = 0.3
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        turned = tensor.rotated(rot)
        np.testing.assert_allclose(tensor.eigenvalues(), turned.eigenvalues())
        np.testing.assert_allclose(tensor.ambient(), turned.ambient(), atol=1e-14)

    def test_pack_hits(self) -> None:
        hits = pack_hits(
            3,
            np.array([2, 0, 2, 2]),
            np.array([0.5, 1.0, 0.25, 3.0]),
            np.zeros(3, dtype=bool),
        )
        np.testing.assert_array_equal([1, 0, 3], hits.count)
        np.testing.assert_array_equal([1, 0, 1], hits.parity())
        np.testing.assert_allclose([0.25, 0.5, 3.0], hits.t[2])
        self.assertEqual(1.0, hits.t[0, 0])
        self.assertTrue(np.all(np.isnan(hits.t[1])))

    def test_scene_errors(self) -> None:
        with self.assertRaises(SceneError):
            SphereScene(np.zeros(3), 0.0)
        with self.assertRaises(SceneError):
            PlaneScene(np.zeros(3), np.zeros(3))
        with self.assertRaises(SceneError):
            SphereScene(np.zeros(1), 1.0)
        with self.assertRaises(SceneError):
            as_points([[1.0, 2.0]], 3)
        np.testing.assert_array_equal([[1.0, 2.0, 3.0]], as_points([1.0, 2.0, 3.0], 3))
