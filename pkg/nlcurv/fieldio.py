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

"""Sampled fields on centered lattices, and their file formats."""

from dataclasses import dataclass
from dataclasses import replace
import json
import math
import os
import struct
from typing import Any
from typing import Dict
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray
from scipy import special

from .errors import ConfigError
from .specfun import unit_sphere_measure


Array = NDArray[np.float64]

DECAY_KINDS = ('gaussian', 'compact', 'algebraic')
SIDECAR_SUFFIX = '.json'


@dataclass(frozen=True)
class Decay:
    """
    Bound on a field far from the origin.

    gaussian:  |f(x)| <= amplitude * exp(-(|x| - offset)² / scale²) for |x| > offset
    compact:   f(x) = 0 for |x| > scale
    algebraic: |f(x)| <= amplitude * |x|^(-scale)

    Every bound applies to f - background, the constant the field tends to at infinity.
    """

    kind: str
    scale: float
    amplitude: float = 1.0
    offset: float = 0.0
    background: float = 0.0

    def __post_init__(self) -> None:
        """Validate the descriptor."""
        if self.kind not in DECAY_KINDS:
            raise ConfigError(
                f"unknown decay '{self.kind}', expected one of {', '.join(DECAY_KINDS)}",
                'decay.kind')
        if not self.scale > 0.0:
            raise ConfigError(f'decay scale must be positive, got {self.scale}', 'decay.scale')

    def mass_outside(self, radius: float, dim: int) -> float:
        """
        Bound the integral of |f| outside a centered ball.

        :param radius: the ball radius
        :param dim: the dimension
        :return: the bound, inf when the descriptor gives none
        """
        if self.kind == 'compact':
            return 0.0 if self.scale <= radius else math.inf
        if self.kind == 'gaussian':
            reach = radius - self.offset
            if reach <= 0.0:
                return math.inf
            return float(
                self.amplitude * math.pi ** (0.5 * dim) * self.scale ** dim
                * special.gammaincc(0.5 * dim, (reach / self.scale) ** 2)
            )
        if self.scale <= dim:
            return math.inf
        return (
            self.amplitude * unit_sphere_measure(dim - 1) * radius ** (dim - self.scale)
            / (self.scale - dim)
        )

    def to_dict(self) -> Dict[str, Any]:
        """Get a JSON-compatible dict."""
        return {
            'kind': self.kind,
            'scale': self.scale,
            'amplitude': self.amplitude,
            'offset': self.offset,
            'background': self.background,
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> 'Decay':
        """Build a descriptor from a dict written by to_dict."""
        try:
            return Decay(
                kind=str(data['kind']),
                scale=float(data['scale']),
                amplitude=float(data.get('amplitude', 1.0)),
                offset=float(data.get('offset', 0.0)),
                background=float(data.get('background', 0.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f'invalid decay descriptor: {e}', 'decay')


@dataclass(frozen=True)
class GridField:
    """
    Scalar, vector or matrix field sampled on the lattice -L/2 + h·i, i = 0..N-1, per axis.

    The first dim axes of values are spatial; any further axes are components.
    """

    values: Array
    length: float
    dim: int
    decay: Decay
    tail_bound: float = 0.0

    def __post_init__(self) -> None:
        """Validate the lattice shape."""
        if self.dim not in (1, 2, 3):
            raise ConfigError(f'fields live in 1 to 3 dimensions, got {self.dim}', 'field.dim')
        shape = self.values.shape[:self.dim]
        if len(shape) != self.dim or len(set(shape)) != 1 or shape[0] < 8:
            raise ConfigError(
                f'field lattice must be N^{self.dim} with N >= 8, got {self.values.shape}',
                'field.shape')
        if not self.length > 0.0:
            raise ConfigError(f'box length must be positive, got {self.length}', 'field.length')

    @property
    def count(self) -> int:
        """Get the number of nodes per axis."""
        return int(self.values.shape[0])

    @property
    def spacing(self) -> float:
        """Get the lattice spacing h."""
        return self.length / self.count

    @property
    def component_shape(self) -> Tuple[int, ...]:
        """Get the shape of the per-node values."""
        return tuple(self.values.shape[self.dim:])

    @property
    def rank(self) -> int:
        """Get the tensor rank of the per-node values."""
        return len(self.component_shape)

    def axis(self) -> Array:
        """Get the node coordinates along one axis."""
        return -0.5 * self.length + self.spacing * np.arange(self.count)

    def coordinates(self) -> Array:
        """Get node coordinates, shape (N, ..., N, dim)."""
        return lattice_coordinates(self.dim, self.length, self.count)

    def boundary_ratio(self) -> float:
        """Get the largest boundary magnitude of f - background relative to its peak."""
        shifted = self.values - self.decay.background
        peak = float(np.max(np.abs(shifted))) if shifted.size else 0.0
        if peak == 0.0:
            return 0.0
        edge = 0.0
        for axis in range(self.dim):
            for index in (0, -1):
                face = np.take(shifted, index, axis=axis)
                edge = max(edge, float(np.max(np.abs(face))))
        return edge / peak

    def with_values(
        self,
        values: ArrayLike,
        decay: Optional[Decay] = None,
        tail_bound: Optional[float] = None,
    ) -> 'GridField':
        """Get a field on the same lattice with new values."""
        return replace(
            self,
            values=np.asarray(values, dtype=float),
            decay=self.decay if decay is None else decay,
            tail_bound=self.tail_bound if tail_bound is None else tail_bound,
        )


def lattice_coordinates(dim: int, length: float, count: int) -> Array:
    """Get the coordinates of every node of a centered lattice, shape (N, ..., N, dim)."""
    axis = -0.5 * length + (length / count) * np.arange(count)
    grids = np.meshgrid(*([axis] * dim), indexing='ij')
    return np.stack(grids, axis=-1)


def gaussian_field(
    dim: int,
    length: float,
    count: int,
    width: float = 1.0 / math.sqrt(math.pi),
    amplitude: float = 1.0,
    center: Optional[Sequence[float]] = None,
) -> GridField:
    """
    Sample amplitude·exp(-|x - c|²/width²); the default is exp(-π|x|²).

    :param dim: the dimension
    :param length: the box side L
    :param count: the number of nodes per axis
    :param width: the Gaussian width
    :param amplitude: the peak value
    :param center: the Gaussian center, the origin by default
    """
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    x = lattice_coordinates(dim, length, count)
    r2 = np.sum((x - c) ** 2, axis=-1)
    values = amplitude * np.exp(-r2 / width ** 2)
    decay = Decay('gaussian', width, abs(amplitude), float(np.linalg.norm(c)))
    return GridField(values=values, length=length, dim=dim, decay=decay)


def constant_field(dim: int, length: float, count: int, value: float) -> GridField:
    """Sample a constant field, described as its own background."""
    values = np.full((count,) * dim, float(value))
    decay = Decay('compact', 0.5 * length, 0.0, background=float(value))
    return GridField(values=values, length=length, dim=dim, decay=decay)


def gaussian_vector_field(
    dim: int,
    length: float,
    count: int,
    centers: ArrayLike,
    width: float = 1.0 / math.sqrt(math.pi),
) -> GridField:
    """
    Sample a vector field whose component j is a unit Gaussian centered at centers[j].

    :param centers: a (dim, dim) array of component centers
    """
    c = np.asarray(centers, dtype=float).reshape(dim, dim)
    parts = [gaussian_field(dim, length, count, width=width, center=row) for row in c]
    offset = max(p.decay.offset for p in parts)
    values = np.stack([p.values for p in parts], axis=-1)
    return GridField(
        values=values, length=length, dim=dim, decay=Decay('gaussian', width, 1.0, offset))


def gaussian_laplacian_field(
    dim: int,
    length: float,
    count: int,
    width: float = 1.0,
) -> GridField:
    """
    Sample Δ exp(-|x|²/w²) = (4|x|²/w⁴ - 2n/w²) exp(-|x|²/w²).

    Its mass and first moments vanish, so fractional derivatives of it decay two orders
    faster than those of a Gaussian and box truncation stays below discretization error.
    """
    x = lattice_coordinates(dim, length, count)
    t = np.sum(x * x, axis=-1) / width ** 2
    values = (4.0 * t - 2.0 * dim) * np.exp(-t) / width ** 2
    # |4t - 2n| e^{-t/2} peaks at t = 0 or at 4t - 2n = 8
    amplitude = max(2.0 * dim, 8.0 * math.exp(-1.0 - 0.25 * dim)) / width ** 2
    decay = Decay('gaussian', math.sqrt(2.0) * width, amplitude)
    return GridField(values=values, length=length, dim=dim, decay=decay)


def _header(dim: int, count: int, length: float) -> bytes:
    return struct.pack(f'<q{dim}qd', dim, *([count] * dim), length)


def write_field(path: str, field: GridField) -> str:
    """
    Write a field as flat little-endian float64 data with a JSON sidecar.

    The binary file starts with the header (n: int64, N per axis: n × int64, L: float64).

    :param path: the binary file path
    :param field: the field
    :return: the sidecar path
    """
    with open(path, 'wb') as f:
        f.write(_header(field.dim, field.count, field.length))
        f.write(np.ascontiguousarray(field.values, dtype='<f8').tobytes())
    sidecar = path + SIDECAR_SUFFIX
    meta = {
        'dim': field.dim,
        'count': field.count,
        'length': field.length,
        'components': list(field.component_shape),
        'decay': field.decay.to_dict(),
        'tail_bound': field.tail_bound,
    }
    with open(sidecar, 'w') as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    return sidecar


def read_field(path: str) -> GridField:
    """
    Read a field written by write_field.

    :param path: the binary file path; the sidecar must sit next to it
    """
    sidecar = path + SIDECAR_SUFFIX
    if not os.path.isfile(path) or not os.path.isfile(sidecar):
        raise ConfigError(f"field file '{path}' or its sidecar is missing", 'field')
    with open(sidecar) as f:
        meta = json.load(f)
    with open(path, 'rb') as f:
        raw = f.read()
    (dim,) = struct.unpack_from('<q', raw, 0)
    header = struct.calcsize(f'<q{dim}qd')
    values = struct.unpack_from(f'<q{dim}qd', raw, 0)
    counts = values[1:1 + dim]
    length = values[1 + dim]
    if dim != meta['dim'] or any(c != meta['count'] for c in counts):
        raise ConfigError(f"field file '{path}' does not match its sidecar", 'field')
    shape = tuple(counts) + tuple(meta['components'])
    data = np.frombuffer(raw, dtype='<f8', offset=header)
    if data.size != int(np.prod(shape)):
        raise ConfigError(f"field file '{path}' is truncated", 'field')
    return GridField(
        values=data.reshape(shape).astype(float),
        length=float(length),
        dim=int(dim),
        decay=Decay.from_dict(meta['decay']),
        tail_bound=float(meta.get('tail_bound', 0.0)),
    )


def write_csv_slice(path: str, field: GridField, index: Optional[int] = None) -> None:
    """
    Export a 1-D or 2-D slice of a field as CSV.

    3-D fields are cut at the given index of the last axis (the middle by default).

    :param path: the CSV path
    :param field: the field
    :param index: the slice index for 3-D fields
    """
    values = field.values
    coords = field.coordinates()
    if field.dim == 3:
        k = field.count // 2 if index is None else index
        values = values[:, :, k]
        coords = coords[:, :, k, :2]
    plane = min(field.dim, 2)
    flat_coords = coords.reshape(-1, plane)
    flat_values = values.reshape(flat_coords.shape[0], -1)
    names = ['x', 'y'][:plane]
    if flat_values.shape[1] == 1:
        names.append('value')
    else:
        names.extend(f'value_{i}' for i in range(flat_values.shape[1]))
    table = np.hstack([flat_coords, flat_values])
    np.savetxt(path, table, fmt='%.17g', delimiter=',', header=','.join(names), comments='')
