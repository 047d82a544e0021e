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

import json
import os
import tempfile
import unittest

import numpy as np

from nlcurv.config import load_config
from nlcurv.config import parse_point_rule
from nlcurv.config import parse_scene
from nlcurv.config import RunConfig
from nlcurv.config import scene_from_config
from nlcurv.config import surface_points
from nlcurv.errors import ConfigError
from nlcurv.errors import SceneError
from nlcurv.meshes import MeshScene
from nlcurv.surface import PlaneScene
from nlcurv.surface import QuadraticGraphScene
from nlcurv.surface import SphereScene


class TestConfig(unittest.TestCase):

    def __init__(self, *args) -> None:
        super().__init__(
            *args,
        )

    def test_parse_scene(self) -> None:
        spec = parse_scene('sphere:r=0.5,n=2')
        self.assertEqual('sphere', spec.name)
        self.assertEqual({'r': 0.5, 'n': 2}, spec.params)
        scene = spec.build()
        self.assertIsInstance(scene, SphereScene)
        self.assertEqual(2, scene.dim)
        self.assertEqual(0.5, scene.scale)

        self.assertEqual({}, parse_scene('plane').params)
        self.assertEqual('mesh', parse_scene('mesh:some/dir/file.off').name)
        self.assertEqual('some/dir/file.off', parse_scene('mesh:some/dir/file.off').params['path'])

    def test_scene_errors(self) -> None:
        with self.assertRaises(ConfigError) as cm:
            parse_scene('cube')
        self.assertEqual('scene', cm.exception.field)
        with self.assertRaises(ConfigError) as cm:
            parse_scene('sphere:radius=1')
        self.assertEqual('scene.radius', cm.exception.field)
        with self.assertRaises(ConfigError) as cm:
            parse_scene('sphere:r=abc')
        self.assertEqual('scene.r', cm.exception.field)
        with self.assertRaises(ConfigError):
            parse_scene('sphere:r')
        with self.assertRaises(ConfigError) as cm:
            parse_scene('icosphere:level=1.5')
        self.assertEqual('scene.level', cm.exception.field)
        with self.assertRaises(ConfigError):
            parse_scene('mesh:')
        with self.assertRaises(SceneError):
            parse_scene('sphere:r=-1').build()
        with self.assertRaises(SceneError):
            parse_scene('torus:R=1,r=2').build()
        with self.assertRaises(ConfigError) as cm:
            parse_scene('graph:kind=cone').build()
        self.assertEqual('scene.kind', cm.exception.field)

    def test_scene_text_round_trip(self) -> None:
        for text in ('sphere', 'sphere:n=2,r=0.5', 'torus:R=3.0,r=0.25',
                     'graph:a=1.0,b=0.5,kind=saddle', 'mesh:a/b.obj'):
            spec = parse_scene(text)
            self.assertEqual(spec, parse_scene(spec.to_text()))
        # Floats keep every digit
        spec = parse_scene('sphere:r=0.1')
        self.assertEqual(0.1, parse_scene(spec.to_text()).params['r'])

    def test_scene_objects(self) -> None:
        spec = scene_from_config({'name': 'torus', 'R': 2, 'r': 0.5})
        self.assertEqual({'R': 2.0, 'r': 0.5}, spec.params)
        self.assertEqual('mesh', scene_from_config({'mesh': 'x.off'}).name)
        with self.assertRaises(ConfigError):
            scene_from_config({'R': 2})
        with self.assertRaises(ConfigError):
            scene_from_config(42)

    def test_catalog_builds(self) -> None:
        graph = parse_scene('graph:kind=saddle,a=2,b=1').build()
        self.assertIsInstance(graph, QuadraticGraphScene)
        self.assertEqual([2.0, -1.0], list(graph.coefficients))
        plane = parse_scene('plane:n=2,axis=0').build()
        self.assertIsInstance(plane, PlaneScene)
        self.assertEqual([1.0, 0.0], list(plane.unit_normal))
        mesh = parse_scene('icosphere:level=1,r=2').build()
        self.assertIsInstance(mesh, MeshScene)
        self.assertEqual(80, len(mesh.faces))
        self.assertEqual('torus', parse_scene('torus').build().name())
        self.assertTrue(parse_scene('implicit-sphere:r=0.5').build().on_surface([0.5, 0.0, 0.0]))

    def test_point_rule(self) -> None:
        self.assertEqual(8, parse_point_rule('grid-on-surface 8'))
        for bad in ('grid-on-surface', 'grid 8', 'grid-on-surface 0', 'grid-on-surface x'):
            with self.assertRaises(ConfigError):
                parse_point_rule(bad)

    def test_surface_points(self) -> None:
        scene = SphereScene(np.array([1.0, 0.0, 0.0]), 0.5)
        points = surface_points(scene, 10)
        self.assertEqual((10, 3), points.shape)
        for p in points:
            self.assertAlmostEqual(0.5, float(np.linalg.norm(p - scene.center)), places=12)
        plane = PlaneScene(np.zeros(3), np.array([0.0, 0.0, 1.0]))
        points = surface_points(plane, 4)
        np.testing.assert_allclose(0.0, points[:, 2], atol=1e-12)

    def test_defaults(self) -> None:
        config = RunConfig()
        self.assertEqual('sphere', config.scene.name)
        self.assertEqual([0.5], config.sigmas)
        self.assertEqual(['angular', 'fullspace'], config.representations)
        self.assertFalse(config.extrapolate)
        points = config.resolve_points(config.build_scene())
        self.assertEqual((1, 3), points.shape)

    def test_round_trip(self) -> None:
        data = {
            'scene': {'name': 'sphere', 'r': 0.5},
            'points': [[0.5, 0, 0], [0, 0.5, 0]],
            'sigmas': [0.25, 0.5],
            'quadrature': {'n_phi': 64, 'n_dir': 32},
            'representations': ['angular'],
            'extrapolate': False,
            'outputs': {'csv': 'out.csv'},
            'verify': ['sphere'],
        }
        config = RunConfig.from_dict(data)
        serialized = config.to_dict()
        self.assertEqual('sphere:r=0.5', serialized['scene'])
        again = RunConfig.from_dict(json.loads(json.dumps(serialized)))
        self.assertEqual(config, again)
        self.assertEqual(serialized, again.to_dict())
        self.assertEqual(64, config.quadrature_spec().n_phi)

        rule = RunConfig.from_dict({'points': 'grid-on-surface 3'})
        self.assertEqual(rule, RunConfig.from_dict(rule.to_dict()))

    def test_field_paths(self) -> None:
        cases = [
            ({'sigmas': [0.5, 1.0]}, 'sigmas[1]'),
            ({'sigmas': []}, 'sigmas'),
            ({'quadrature': {'n_phi': 3}}, 'quadrature.n_phi'),
            ({'quadrature': {'nodes': 3}}, 'quadrature.nodes'),
            ({'representations': ['angular', 'bogus']}, 'representations[1]'),
            ({'verify': ['nothing']}, 'verify[0]'),
            ({'outputs': {'xml': 'a.xml'}}, 'outputs.xml'),
            ({'points': [[0.0, 'a', 0.0]]}, 'points[0][1]'),
            ({'points': 'random 3'}, 'points'),
            ({'extrapolate': 'yes'}, 'extrapolate'),
            ({'colour': 'red'}, 'colour'),
        ]
        for data, path in cases:
            with self.assertRaises(ConfigError) as cm:
                RunConfig.from_dict(data)
            self.assertEqual(path, cm.exception.field, msg=str(data))
            self.assertTrue(str(cm.exception).startswith(path))

    def test_resolve_points(self) -> None:
        config = RunConfig.from_dict({'scene': 'sphere:r=2', 'points': [[2.0, 0.0, 0.0]]})
        points = config.resolve_points(config.build_scene())
        np.testing.assert_allclose([[2.0, 0.0, 0.0]], points)
        config = RunConfig.from_dict({'scene': 'sphere:r=2', 'points': [[2.0, 0.0]]})
        with self.assertRaises(ConfigError) as cm:
            config.resolve_points(config.build_scene())
        self.assertEqual('points[0]', cm.exception.field)

    def test_merged(self) -> None:
        config = RunConfig.from_dict({
            'sigmas': [0.25],
            'quadrature': {'n_phi': 64},
            'outputs': {'csv': 'a.csv'},
        })
        merged = config.merged({
            'sigmas': [0.75],
            'quadrature': {'n_dir': 16},
            'outputs': None,
            'scene': None,
        })
        self.assertEqual([0.75], merged.sigmas)
        self.assertEqual({'n_phi': 64, 'n_dir': 16}, merged.quadrature)
        self.assertEqual({'csv': 'a.csv'}, merged.outputs)
        self.assertEqual('sphere', merged.scene.name)

    def test_load_config(self) -> None:
        self.assertEqual(RunConfig(), load_config(None))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'run.json')
            with open(path, 'w') as f:
                json.dump({'scene': 'torus', 'sigmas': [0.3]}, f)
            config = load_config(path)
            self.assertEqual('torus', config.scene.name)
            self.assertEqual([0.3], config.sigmas)

            with open(path, 'w') as f:
                f.write('{\n  "scene": "torus",\n  "sigmas": [0.3,]\n}\n')
            with self.assertRaises(ConfigError) as cm:
                load_config(path)
            self.assertIn('line 3', str(cm.exception))

            with open(path, 'w') as f:
                f.write('[1, 2]')
            with self.assertRaises(ConfigError):
                load_config(path)
        with self.assertRaises(ConfigError):
            load_config(os.path.join('does', 'not', 'exist.json'))
