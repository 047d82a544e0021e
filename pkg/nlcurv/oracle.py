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

"""Closed-form sphere values and the spectral fractional-operator oracle."""

from dataclasses import dataclass
import math
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from .errors import ConfigError
from .errors import PeriodizationError
from .fieldio import Array
from .fieldio import GridField
from .specfun import beta
from .surface import frame_from_normal
from .surface import SymTangentTensor
from .surface import TangentFrame


SPECTRAL_OPERATORS = ('laplacian', 'gradient', 'divergence')
DEFAULT_PAD = 4
PERIODIZATION_TOLERANCE = 1e-8


def _check_sphere(n: int, radius: float, sigma: float) -> None:
    if n < 2:
        raise ConfigError(f'dimension must be at least 2, got {n}', 'n')
    if not radius > 0.0:
        raise ConfigError(f'radius must be positive, got {radius}', 'radius')
    if not 0.0 < sigma < 1.0:
        raise ConfigError(f'sigma must lie in (0, 1), got {sigma}', 'sigma')


def sphere_k(n: int, radius: float, sigma: float) -> float:
    """
    Get the directional curvature of a sphere with outward normal.

    k = -B((1-σ)/2, (n-1)/2) / (σ (2ρ)^σ), the same for every point and direction.

    :param n: the ambient dimension
    :param radius: the sphere radius ρ
    :param sigma: the order σ in (0, 1)
    """
    _check_sphere(n, radius, sigma)
    return -beta(0.5 * (1.0 - sigma), 0.5 * (n - 1)) / (sigma * (2.0 * radius) ** sigma)


def sphere_H(n: int, radius: float, sigma: float) -> float:  # noqa: N802
    """Get the nonlocal mean curvature of a sphere, equal to its directional curvature."""
    return sphere_k(n, radius, sigma)


def sphere_L(
    n: int,
    radius: float,
    sigma: float,
    frame: Optional[TangentFrame] = None,
) -> SymTangentTensor:
    """
    Get the nonlocal curvature tensor of a sphere, k times the tangent identity.

    :param frame: the tangent frame, by default the one at the north pole
    """
    k = sphere_k(n, radius, sigma)
    if frame is None:
        pole = np.zeros(n)
        pole[-1] = 1.0
        frame = frame_from_normal(radius * pole, pole)
    return SymTangentTensor(frame=frame, matrix=k * np.eye(n - 1))


def sphere_classical_k(radius: float) -> float:
    """Get the classical normal curvature of a sphere with outward normal, -1/ρ."""
    if not radius > 0.0:
        raise ConfigError(f'radius must be positive, got {radius}', 'radius')
    return -1.0 / radius


@dataclass(frozen=True)
class SphereOracle:
    """Closed-form values for a sphere of radius ρ in R^n at order σ."""

    n: int
    radius: float
    sigma: float

    def __post_init__(self) -> None:
        """Validate parameters."""
        _check_sphere(self.n, self.radius, self.sigma)

    def k(self) -> float:
        """Get k_σ,e."""
        return sphere_k(self.n, self.radius, self.sigma)

    def tensor(self, frame: Optional[TangentFrame] = None) -> SymTangentTensor:
        """Get L_σ."""
        return sphere_L(self.n, self.radius, self.sigma, frame)

    def gaussian(self) -> float:
        """Get K_σ = det L_σ."""
        return self.k() ** (self.n - 1)

    def classical_k(self) -> float:
        """Get the σ → 1 limit of (1-σ)·k_σ,e."""
        return sphere_classical_k(self.radius)


def sphere_geometry(r: float, radius: float) -> Tuple[Array, float]:
    """
    Intersect the circle of radius r about z with a great circle of the sphere through z.

    :param r: the distance from z, in (0, 2ρ)
    :param radius: the sphere radius ρ
    :return: (p, φ) where p = (r√(1-(r/2ρ)²), -r²/2ρ) in the (e, n(z)) chart and φ is the
        angle of p - z from n(z)
    """
    if not 0.0 < r < 2.0 * radius:
        raise ConfigError(f'r must lie in (0, 2ρ) = (0, {2.0 * radius}), got {r}', 'r')
    q = r / (2.0 * radius)
    root = math.sqrt(1.0 - q * q)
    p = np.array([r * root, -r * r / (2.0 * radius)])
    return p, math.pi - math.atan(root / q)


def _frequencies(count: int, spacing: float, dim: int) -> List[Array]:
    freq = np.fft.fftfreq(count, d=spacing)
    return list(np.meshgrid(*([freq] * dim), indexing='ij'))


def spectral_frac_op(
    field: GridField,
    operator: str,
    alpha: float,
    pad: int = DEFAULT_PAD,
    check_boundary: bool = True,
) -> GridField:
    """
    Apply a fractional operator as a Fourier multiplier on the periodic extension.

    The field is zero-padded to pad·N nodes per axis. Symbols: laplacian |2πξ|^α, gradient
    (2πiξ)|2πξ|^(α-1), divergence the trace of the gradient symbol.

    :param field: the field; scalar or vector for laplacian and gradient, vector for divergence
    :param operator: one of laplacian, gradient, divergence
    :param alpha: the order
    :param pad: the zero-padding factor, >= 1
    :param check_boundary: whether to reject fields that are not small at the box boundary
    :return: the result on the original lattice
    """
    if operator not in SPECTRAL_OPERATORS:
        raise ConfigError(
            f"unknown operator '{operator}', expected one of {', '.join(SPECTRAL_OPERATORS)}",
            'operator')
    if pad < 1:
        raise ConfigError(f'padding factor must be at least 1, got {pad}', 'pad')
    if check_boundary and field.boundary_ratio() > PERIODIZATION_TOLERANCE:
        raise PeriodizationError(
            f'field boundary magnitude {field.boundary_ratio():.3g} of its peak exceeds '
            f'{PERIODIZATION_TOLERANCE:g}')
    dim, count = field.dim, field.count
    size = pad * count
    axes = tuple(range(dim))
    padded = np.zeros((size,) * dim + field.component_shape)
    padded[(slice(0, count),) * dim] = field.values - field.decay.background
    spectrum = np.fft.fftn(padded, axes=axes)
    xi = _frequencies(size, field.spacing, dim)
    modulus = 2.0 * math.pi * np.sqrt(sum(x * x for x in xi))
    comp = (Ellipsis,) + (None,) * field.rank

    if operator == 'laplacian':
        out = spectrum * (modulus ** alpha)[comp]
    else:
        with np.errstate(divide='ignore', invalid='ignore'):
            radial = np.where(modulus > 0.0, modulus ** (alpha - 1.0), 0.0)
        factors = [2j * math.pi * x * radial for x in xi]
        if operator == 'gradient':
            out = np.stack([spectrum * f[comp] for f in factors], axis=-1)
        else:
            if field.component_shape[-1:] != (dim,):
                raise ConfigError('divergence needs a vector field', 'field')
            lead = (Ellipsis,) + (None,) * (field.rank - 1)
            out = spectrum[..., 0] * factors[0][lead]
            for j in range(1, dim):
                out = out + spectrum[..., j] * factors[j][lead]
    values = np.real(np.fft.ifftn(out, axes=axes))[(slice(0, count),) * dim]
    return field.with_values(values)
