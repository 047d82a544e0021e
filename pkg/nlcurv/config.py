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

"""Run configuration: the scene catalog, JSON config files, and flag overrides."""

from dataclasses import dataclass
from dataclasses import field
import json
import math
from typing import Any
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Union

import numpy as np

from .curvature import REPRESENTATIONS
from .errors import ConfigError
from .meshes import icosphere
from .meshes import load_mesh
from .meshes import torus_mesh
from .quadrature import QuadratureSpec
from .surface import Array
from .surface import bump_scene
from .surface import implicit_sphere_scene
from .surface import PlaneScene
from .surface import QuadraticGraphScene
from .surface import random_unit_vectors
from .surface import SphereScene
from .surface import SurfaceScene
from .surface import torus_scene
from .verify import SUITES


Scalar = Union[float, int, str]

SCENE_PARAMETERS: Dict[str, Dict[str, Scalar]] = {
    'sphere': {'r': 1.0, 'cx': 0.0, 'cy': 0.0, 'cz': 0.0, 'n': 3},
    'plane': {'n': 3, 'axis': -1},
    'torus': {'R': 2.0, 'r': 0.5},
    'graph': {'kind': 'paraboloid', 'a': 1.0, 'b': 1.0},
    'implicit-sphere': {'r': 1.0, 'n': 3},
    'icosphere': {'r': 1.0, 'level': 3},
    'torus-mesh': {'R': 2.0, 'r': 0.5, 'nu': 128, 'nv': 64},
    'mesh': {'path': ''},
}
GRAPH_KINDS = ('paraboloid', 'saddle', 'bump')
POINT_RULE = 'grid-on-surface'
OUTPUT_KEYS = ('csv', 'json')
DEFAULT_SIGMAS = (0.5,)
DEFAULT_REPRESENTATIONS = ('angular', 'fullspace')
POINT_SEED = 0


def _coerce(value: Any, default: Scalar, path: str) -> Scalar:
    """Convert a value to the type of a default, reporting failures at a field path."""
    try:
        if isinstance(default, str):
            if not isinstance(value, (str, int, float)):
                raise ValueError(f'expected a string, got {value!r}')
            return str(value)
        if isinstance(default, int):
            number = float(value)
            if not number.is_integer():
                raise ValueError(f'{value} is not an integer')
            return int(number)
        number = float(value)
        if not math.isfinite(number):
            raise ValueError(f'{value} is not finite')
        return number
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path)


@dataclass(frozen=True)
class SceneSpec:
    """A catalog scene name with the parameters given explicitly."""

    name: str
    params: Dict[str, Scalar] = field(default_factory=dict)

    def value(self, key: str) -> Scalar:
        """Get a parameter, falling back to its catalog default."""
        return self.params.get(key, SCENE_PARAMETERS[self.name][key])

    def number(self, key: str) -> float:
        """Get a numeric parameter."""
        return float(self.value(key))

    def to_text(self) -> str:
        """Get the `name:key=value,...` form, parsed back by parse_scene."""
        if self.name == 'mesh':
            return f"mesh:{self.params['path']}"
        if not self.params:
            return self.name
        items = ','.join(
            f'{k}={v!r}' if isinstance(v, float) else f'{k}={v}'
            for k, v in sorted(self.params.items())
        )
        return f'{self.name}:{items}'

    def build(self) -> SurfaceScene:
        """
        Build the scene.

        :raises SceneError: on parameters the scene rejects
        """
        name = self.name
        if name == 'sphere':
            n = int(self.value('n'))
            if n < 2:
                raise ConfigError(f'dimension must be at least 2, got {n}', 'scene.n')
            center = np.zeros(n)
            for i, key in enumerate(('cx', 'cy', 'cz')[:n]):
                center[i] = self.number(key)
            return SphereScene(center, self.number('r'))
        if name == 'plane':
            n = int(self.value('n'))
            axis = int(self.value('axis'))
            if not -n <= axis < n:
                raise ConfigError(f'axis {axis} out of range for n={n}', 'scene.axis')
            normal = np.zeros(n)
            normal[axis] = 1.0
            return PlaneScene(np.zeros(n), normal)
        if name == 'torus':
            return torus_scene(self.number('R'), self.number('r'))
        if name == 'graph':
            kind = str(self.value('kind'))
            a, b = self.number('a'), self.number('b')
            if kind == 'paraboloid':
                return QuadraticGraphScene((a, b), label='paraboloid')
            if kind == 'saddle':
                return QuadraticGraphScene((a, -b), label='saddle')
            if kind == 'bump':
                return bump_scene(a, b)
            raise ConfigError(
                f"unknown graph kind '{kind}', expected one of {', '.join(GRAPH_KINDS)}",
                'scene.kind')
        if name == 'implicit-sphere':
            return implicit_sphere_scene(self.number('r'), int(self.value('n')))
        if name == 'icosphere':
            return icosphere(int(self.value('level')), self.number('r'))
        if name == 'torus-mesh':
            return torus_mesh(
                self.number('R'), self.number('r'), int(self.value('nu')), int(self.value('nv')))
        return load_mesh(str(self.value('path')))


def scene_from_params(name: str, params: Mapping[str, Any]) -> SceneSpec:
    """
    Build a scene spec from a catalog name and raw parameter values.

    :raises ConfigError: on unknown names or parameters, or values of the wrong type
    """
    if name not in SCENE_PARAMETERS:
        raise ConfigError(
            f"unknown scene '{name}', expected one of {', '.join(SCENE_PARAMETERS)}", 'scene')
    defaults = SCENE_PARAMETERS[name]
    values: Dict[str, Scalar] = {}
    for key, value in params.items():
        if key not in defaults:
            raise ConfigError(f"unknown parameter for scene '{name}'", f'scene.{key}')
        values[key] = _coerce(value, defaults[key], f'scene.{key}')
    if name == 'mesh' and not values.get('path'):
        raise ConfigError('mesh scenes need a file path', 'scene.path')
    return SceneSpec(name=name, params=values)


def parse_scene(text: str) -> SceneSpec:
    """
    Parse a scene string, `name`, `name:key=value,...` or `mesh:path`.

    :raises ConfigError: on malformed text
    """
    name, _, rest = text.strip().partition(':')
    if name == 'mesh':
        return scene_from_params('mesh', {'path': rest})
    params: Dict[str, str] = {}
    for item in filter(None, (s.strip() for s in rest.split(','))):
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"expected key=value, got '{item}'", 'scene')
        params[key.strip()] = value.strip()
    return scene_from_params(name, params)


def scene_from_config(value: Any) -> SceneSpec:
    """Get a scene spec from a config entry, a string or an object."""
    if isinstance(value, str):
        return parse_scene(value)
    if isinstance(value, dict):
        if 'mesh' in value:
            if len(value) != 1:
                raise ConfigError('mesh scenes take no other parameters', 'scene')
            return scene_from_params('mesh', {'path': value['mesh']})
        params = dict(value)
        name = params.pop('name', None)
        if not isinstance(name, str):
            raise ConfigError('scene objects need a name', 'scene.name')
        return scene_from_params(name, params)
    raise ConfigError(f'expected a string or an object, got {value!r}', 'scene')


def parse_point_rule(rule: str) -> int:
    """
    Get the point count of a `grid-on-surface N` sampling rule.

    :raises ConfigError: on any other rule
    """
    parts = rule.split()
    if len(parts) != 2 or parts[0] != POINT_RULE or not parts[1].isdigit() or int(parts[1]) < 1:
        raise ConfigError(f"expected '{POINT_RULE} N' with N >= 1, got '{rule}'", 'points')
    return int(parts[1])


def _spread_directions(count: int, dim: int) -> Array:
    """Get count roughly uniform unit vectors in R^dim, deterministically."""
    k = np.arange(count) + 0.5
    if dim == 2:
        theta = 2.0 * math.pi * k / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if dim == 3:
        # Golden-angle spiral
        z = 1.0 - 2.0 * k / count
        theta = math.pi * (3.0 - math.sqrt(5.0)) * k
        rho = np.sqrt(1.0 - z * z)
        return np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)
    return random_unit_vectors(np.random.default_rng(POINT_SEED), count, dim)


def surface_points(scene: SurfaceScene, count: int) -> Array:
    """
    Sample points on a surface by projecting a spread of nearby points onto it.

    Bounded scenes start from their bounding sphere; unbounded ones from a circle of radius
    scale/2 in the coordinate hyperplane x_n = 0.
    """
    ball = scene.bounding_ball()
    if ball is not None:
        center, radius = ball
        raw = center + radius * _spread_directions(count, scene.dim)
    elif count == 1:
        raw = np.zeros((1, scene.dim))
    else:
        raw = np.zeros((count, scene.dim))
        raw[:, :-1] = 0.5 * scene.scale * _spread_directions(count, scene.dim - 1)
    return np.array([scene.project(p) for p in raw])


def _float_list(value: Any, path: str) -> List[float]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f'expected a list, got {value!r}', path)
    return [float(_coerce(v, 0.0, f'{path}[{i}]')) for i, v in enumerate(value)]


def _choice_list(value: Any, allowed: Any, path: str) -> List[str]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f'expected a list, got {value!r}', path)
    for i, v in enumerate(value):
        if v not in allowed:
            raise ConfigError(f"'{v}' is not one of {', '.join(allowed)}", f'{path}[{i}]')
    return [str(v) for v in value]


PointsSpec = Union[str, List[List[float]]]


@dataclass
class RunConfig:
    """Everything a run needs besides the global options."""

    scene: SceneSpec = field(default_factory=lambda: SceneSpec('sphere'))
    points: PointsSpec = field(default_factory=list)
    sigmas: List[float] = field(default_factory=lambda: list(DEFAULT_SIGMAS))
    quadrature: Dict[str, Any] = field(default_factory=dict)
    representations: List[str] = field(default_factory=lambda: list(DEFAULT_REPRESENTATIONS))
    extrapolate: bool = False
    outputs: Dict[str, str] = field(default_factory=dict)
    verify: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Validate every field."""
        for i, s in enumerate(self.sigmas):
            if not 0.0 < s < 1.0:
                raise ConfigError(f'must lie in (0, 1), got {s}', f'sigmas[{i}]')
        if not self.sigmas:
            raise ConfigError('at least one order is needed', 'sigmas')
        if isinstance(self.points, str):
            parse_point_rule(self.points)
        self.quadrature_spec()
        _choice_list(self.representations, REPRESENTATIONS, 'representations')
        _choice_list(self.verify, SUITES, 'verify')
        for key in self.outputs:
            if key not in OUTPUT_KEYS:
                raise ConfigError(
                    f"unknown output, expected one of {', '.join(OUTPUT_KEYS)}", f'outputs.{key}')

    def quadrature_spec(self) -> QuadratureSpec:
        """Get the quadrature parameters with the overrides applied."""
        return QuadratureSpec.from_dict(self.quadrature)

    def build_scene(self) -> SurfaceScene:
        """Build the configured scene."""
        return self.scene.build()

    def resolve_points(self, scene: SurfaceScene) -> Array:
        """
        Get the evaluation points, projected onto the surface.

        With no points configured, a single point is sampled.
        """
        if isinstance(self.points, str):
            return surface_points(scene, parse_point_rule(self.points))
        if not self.points:
            return surface_points(scene, 1)
        out = []
        for i, p in enumerate(self.points):
            if len(p) != scene.dim:
                raise ConfigError(
                    f'point has dimension {len(p)}, expected {scene.dim}', f'points[{i}]')
            out.append(scene.project(p))
        return np.array(out)

    def to_dict(self) -> Dict[str, Any]:
        """Get the JSON-compatible form, read back identically by from_dict."""
        points = self.points
        return {
            'scene': self.scene.to_text(),
            'points': points if isinstance(points, str) else [list(p) for p in points],
            'sigmas': list(self.sigmas),
            'quadrature': dict(sorted(self.quadrature.items())),
            'representations': list(self.representations),
            'extrapolate': self.extrapolate,
            'outputs': dict(sorted(self.outputs.items())),
            'verify': list(self.verify),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunConfig':
        """
        Build a config from a parsed JSON object.

        :raises ConfigError: on unknown keys or invalid values, naming the field path
        """
        known = set(cls().to_dict())
        for key in data:
            if key not in known:
                raise ConfigError('unknown configuration key', str(key))
        kwargs: Dict[str, Any] = {}
        if 'scene' in data:
            kwargs['scene'] = scene_from_config(data['scene'])
        if 'points' in data:
            points = data['points']
            if isinstance(points, str):
                kwargs['points'] = points
            elif isinstance(points, (list, tuple)):
                kwargs['points'] = [_float_list(p, f'points[{i}]') for i, p in enumerate(points)]
            else:
                raise ConfigError(f'expected a list or a sampling rule, got {points!r}', 'points')
        if 'sigmas' in data:
            kwargs['sigmas'] = _float_list(data['sigmas'], 'sigmas')
        if 'quadrature' in data:
            if not isinstance(data['quadrature'], dict):
                raise ConfigError('expected an object', 'quadrature')
            kwargs['quadrature'] = dict(data['quadrature'])
        if 'representations' in data:
            kwargs['representations'] = _choice_list(
                data['representations'], REPRESENTATIONS, 'representations')
        if 'extrapolate' in data:
            if not isinstance(data['extrapolate'], bool):
                raise ConfigError(f"expected true or false, got {data['extrapolate']!r}",
                                  'extrapolate')
            kwargs['extrapolate'] = data['extrapolate']
        if 'outputs' in data:
            outputs = data['outputs']
            if not isinstance(outputs, dict):
                raise ConfigError('expected an object', 'outputs')
            kwargs['outputs'] = {str(k): str(v) for k, v in outputs.items()}
        if 'verify' in data:
            kwargs['verify'] = _choice_list(data['verify'], SUITES, 'verify')
        return cls(**kwargs)

    def merged(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        """
        Get a copy with command-line values applied; None means not given.

        Quadrature and output overrides are merged key by key.
        """
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ('quadrature', 'outputs'):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return RunConfig.from_dict(data)


def load_config(path: Optional[str]) -> RunConfig:
    """
    Read a JSON config file; no path gives the defaults.

    :raises ConfigError: if the file cannot be read or parsed, with the line of the error
    """
    if not path:
        return RunConfig()
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read '{path}': {e.strerror}", 'config')
    except json.JSONDecodeError as e:
        raise ConfigError(f'line {e.lineno}, column {e.colno}: {e.msg}', 'config')
    if not isinstance(data, dict):
        raise ConfigError('the top level must be an object', 'config')
    return RunConfig.from_dict(data)
