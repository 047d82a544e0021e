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

"""Nonlocal directional, mean and Gaussian curvatures and the nonlocal curvature tensor."""

from dataclasses import dataclass
from dataclasses import field
import math
from typing import Any
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigError
from .errors import NonConvergent
from .errors import RepresentationUnavailable
from .logger import logger
from .meshes import MeshScene
from .quadrature import ambient_ray_integrals
from .quadrature import AmbientRays
from .quadrature import direction_grid
from .quadrature import DirectionGrid
from .quadrature import halfplane_pv_integral
from .quadrature import PVResult
from .quadrature import QuadratureSpec
from .quadrature import scalar_kernel
from .quadrature import surface_integral
from .quadrature import tensor_kernel
from .specfun import sphere_measure_constant
from .surface import Array
from .surface import LevelSetScene
from .surface import SurfaceScene
from .surface import SymTangentTensor
from .surface import tangent_frame
from .surface import TangentFrame
from .tasks import run_tasks


REPRESENTATIONS = ('angular', 'fullspace', 'surface')
DEFAULT_LIMIT_SIGMAS = (0.9, 0.95, 0.99)
LIMIT_TOLERANCE = 0.1


def _check_sigma(sigma: float) -> None:
    if not 0.0 < sigma < 1.0:
        raise ConfigError(f'sigma must lie in (0, 1), got {sigma}', 'sigma')


def _frame(scene: SurfaceScene, z: ArrayLike, frame: Optional[TangentFrame]) -> TangentFrame:
    return tangent_frame(scene, z) if frame is None else frame


@dataclass(frozen=True)
class DirectionalSamples:
    """Directional curvatures over a direction grid of the tangent space."""

    frame: TangentFrame
    grid: DirectionGrid
    values: Array
    cancel_residual: float
    tail_bound: float
    nodes: int


def directional_curvature(
    scene: SurfaceScene,
    z: ArrayLike,
    e: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    frame: Optional[TangentFrame] = None,
) -> float:
    """
    Compute the nonlocal directional curvature k_σ,e(z).

    :param e: a unit tangent vector at z, in ambient coordinates
    """
    _check_sigma(sigma)
    frame = _frame(scene, z, frame)
    return halfplane_pv_integral(scene, frame.z, frame, e, sigma, spec).value


def directional_curvatures(
    scene: SurfaceScene,
    z: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    frame: Optional[TangentFrame] = None,
    threads: int = 1,
) -> DirectionalSamples:
    """
    Compute k_σ,e(z) for every direction of the direction grid over U(T_zS).

    :param threads: the number of directions evaluated concurrently
    """
    _check_sigma(sigma)
    frame = _frame(scene, z, frame)
    grid = direction_grid(frame, spec.n_dir)

    def one(e: Array) -> PVResult:
        return halfplane_pv_integral(scene, frame.z, frame, e, sigma, spec)

    results = run_tasks(one, list(grid.ambient), threads)
    logger.verbose_print(
        f'{len(results)} directional curvature(s) at {list(frame.z)}, σ = {sigma}')
    return DirectionalSamples(
        frame=frame,
        grid=grid,
        values=np.array([r.value for r in results]),
        cancel_residual=max(r.cancel_residual for r in results),
        tail_bound=sum(r.tail_bound for r in results),
        nodes=sum(r.nodes for r in results),
    )


def _volume_mean(rays: AmbientRays, n: int) -> float:
    return float(rays.weights @ rays.values) / sphere_measure_constant(n)


def _average_mean(samples: DirectionalSamples, n: int) -> float:
    return float(samples.grid.weights @ samples.values) / sphere_measure_constant(n)


def mean_curvature_volume(
    scene: SurfaceScene,
    z: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    frame: Optional[TangentFrame] = None,
) -> float:
    """Compute H_σ(z) from the principal-value integral of χ̂ over R^n."""
    _check_sigma(sigma)
    frame = _frame(scene, z, frame)
    return _volume_mean(ambient_ray_integrals(scene, frame.z, frame, sigma, spec), scene.dim)


def mean_curvature_avg(
    scene: SurfaceScene,
    z: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    frame: Optional[TangentFrame] = None,
    threads: int = 1,
) -> float:
    """
    Compute H_σ(z) as the average of k_σ,e(z) over unit tangent directions.

    For n = 2 the directions are ±e with ω_0 = 2, so this is (k_e + k_-e)/2.
    """
    samples = directional_curvatures(scene, z, sigma, spec, frame, threads)
    return _average_mean(samples, scene.dim)


def mean_curvature_surface(
    scene: SurfaceScene,
    z: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
) -> float:
    """
    Compute H_σ(z) from the surface integral of (z−y)·n_A(y)/|z−y|^{n+σ} over a mesh.

    :raises RepresentationUnavailable: if the scene is not a triangle mesh
    """
    _check_sigma(sigma)
    result = surface_integral(scene, z, scalar_kernel, sigma, spec)
    return 2.0 * float(result.value[0]) / (sigma * sphere_measure_constant(scene.dim))


def _tensor_from_samples(samples: DirectionalSamples, sigma: float, n: int) -> SymTangentTensor:
    e = samples.grid.coords
    weighted = samples.grid.weights * samples.values
    outer = np.einsum('m,mi,mj->ij', weighted, e, e)
    eye = np.eye(n - 1) * weighted.sum()
    factor = (n - 1) / ((1.0 + sigma) * sphere_measure_constant(n))
    return SymTangentTensor.symmetrized(samples.frame, factor * ((n + sigma) * outer - eye))


def _tensor_from_rays(
    rays: AmbientRays,
    frame: TangentFrame,
    sigma: float,
    n: int,
) -> SymTangentTensor:
    weighted = rays.weights * rays.values
    outer = np.einsum('m,mi,mj->ij', weighted, rays.coords, rays.coords)
    eye = np.eye(n - 1) * weighted.sum()
    factor = (n - 1) / ((1.0 + sigma) * sphere_measure_constant(n))
    return SymTangentTensor.symmetrized(frame, factor * ((n + sigma) * outer - eye))


def _tensor_from_surface(
    scene: SurfaceScene,
    frame: TangentFrame,
    sigma: float,
    spec: QuadratureSpec,
) -> SymTangentTensor:
    n = scene.dim
    result = surface_integral(scene, frame.z, tensor_kernel(sigma, n), sigma, spec)
    factor = 2.0 * (n - 1) / ((1.0 + sigma) * sigma * sphere_measure_constant(n))
    native = tangent_frame(scene, frame.z)
    tensor = SymTangentTensor.symmetrized(native, factor * result.value.reshape(n - 1, n - 1))
    # Re-express in the requested frame
    return tensor.rotated(frame.tangents @ native.tangents.T)


def curvature_tensor(
    scene: SurfaceScene,
    z: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    representation: str = 'angular',
    frame: Optional[TangentFrame] = None,
    threads: int = 1,
) -> SymTangentTensor:
    """
    Compute the nonlocal curvature tensor L_σ(z).

    :param representation: 'angular' averages k_σ,e((n+σ)e⊗e − 1) over directions,
        'fullspace' integrates χ̂((n+σ)ê⊗ê − 1) over R^n, 'surface' integrates over a mesh
    :raises RepresentationUnavailable: for 'surface' on a scene that is not a mesh
    """
    _check_sigma(sigma)
    if representation not in REPRESENTATIONS:
        raise ConfigError(
            f"unknown representation '{representation}', "
            f"expected one of {', '.join(REPRESENTATIONS)}",
            'representations')
    frame = _frame(scene, z, frame)
    if representation == 'angular':
        samples = directional_curvatures(scene, frame.z, sigma, spec, frame, threads)
        return _tensor_from_samples(samples, sigma, scene.dim)
    if representation == 'fullspace':
        rays = ambient_ray_integrals(scene, frame.z, frame, sigma, spec)
        return _tensor_from_rays(rays, frame, sigma, scene.dim)
    return _tensor_from_surface(scene, frame, sigma, spec)


def gaussian_curvature(tensor: SymTangentTensor) -> float:
    """Get K_σ = det L_σ."""
    return tensor.determinant()


def gaussian_curvature_double_integral(samples: DirectionalSamples, sigma: float) -> float:
    """
    Compute K_σ for n = 3 from a double integral of directional curvatures.

    K_σ = 1/(2(1+σ)²π²) ∬ k_e k_ẽ ((3+σ)² sin²ϑ(e, ẽ) − 2(2+σ)) de dẽ.
    """
    e = samples.grid.coords
    if e.shape[1] != 2:
        raise RepresentationUnavailable('the double-integral Gaussian curvature needs n = 3')
    weighted = samples.grid.weights * samples.values
    cos2 = (e @ e.T) ** 2
    kernel = (3.0 + sigma) ** 2 * (1.0 - cos2) - 2.0 * (2.0 + sigma)
    return float(weighted @ kernel @ weighted) / (2.0 * (1.0 + sigma) ** 2 * math.pi ** 2)


def classical_reconstruction(
    k_samples: ArrayLike,
    grid: DirectionGrid,
    frame: TangentFrame,
) -> SymTangentTensor:
    """
    Rebuild the classical curvature tensor from normal curvatures k_e on a direction grid.

    L = (n−1)/(2ω_{n−2}) ∫ k_e((n+1)e⊗e − 1) de.
    """
    k = np.asarray(k_samples, dtype=float)
    n = len(frame.normal)
    weighted = grid.weights * k
    outer = np.einsum('m,mi,mj->ij', weighted, grid.coords, grid.coords)
    eye = np.eye(n - 1) * weighted.sum()
    factor = (n - 1) / (2.0 * sphere_measure_constant(n))
    return SymTangentTensor.symmetrized(frame, factor * ((n + 1) * outer - eye))


def classical_tensor(
    scene: SurfaceScene,
    z: ArrayLike,
    frame: Optional[TangentFrame] = None,
) -> SymTangentTensor:
    """
    Get the classical curvature tensor L = −∇ˢn at z.

    Level-set scenes use the Hessian of the level function; meshes use the fitted
    osculating quadric of the nearest vertex.

    :raises RepresentationUnavailable: for other scenes
    """
    frame = _frame(scene, z, frame)
    if isinstance(scene, LevelSetScene):
        point = frame.z[None, :]
        grad = scene.gradient(point)[0]
        hess = scene.hessian(point)[0]
        t = frame.tangents
        return SymTangentTensor.symmetrized(frame, -(t @ hess @ t.T) / np.linalg.norm(grad))
    if isinstance(scene, MeshScene):
        vertex = scene.nearest_vertex(frame.z)
        tangents, shape = scene.fit_shape_operator(vertex)
        ambient = tangents.T @ shape @ tangents
        t = frame.tangents
        return SymTangentTensor.symmetrized(frame, t @ ambient @ t.T)
    raise RepresentationUnavailable(f'no classical curvature tensor for {scene.name()}')


@dataclass(frozen=True)
class LimitEstimate:
    """Extrapolated σ → 1 limit of (1−σ)·quantity."""

    value: Array
    residual: float
    sigmas: List[float]


def _extrapolate_to_zero(x: Array, q: Array) -> Array:
    """Evaluate at 0 the polynomial through (x_i, q_i), q_i arrays of a common shape."""
    weights = np.ones(len(x))
    for i in range(len(x)):
        for j in range(len(x)):
            if i != j:
                weights[i] *= x[j] / (x[j] - x[i])
    return np.asarray(np.tensordot(weights, q, axes=1))


def sigma_to_one_limit(
    values: Mapping[float, Union[float, ArrayLike, SymTangentTensor]],
    kind: str = 'k',
) -> LimitEstimate:
    """
    Extrapolate (1−σ)·value to σ → 1 by Richardson extrapolation in 1−σ.

    All points give the estimate; the two closest to σ = 1 give the check extrapolant.

    :param values: quantity per σ, at least 3 orders in (0, 1)
    :param kind: 'k', 'H' or 'L', used in messages
    :raises NonConvergent: if the two extrapolants differ by more than 10 %
    """
    if len(values) < 3:
        raise ConfigError(f'need at least 3 σ values to extrapolate {kind}, got {len(values)}',
                          'sigmas')
    sigmas = sorted(values)
    for s in sigmas:
        _check_sigma(s)
    x = np.array([1.0 - s for s in sigmas])
    q = np.array([
        (1.0 - s) * np.asarray(
            values[s].matrix if isinstance(values[s], SymTangentTensor) else values[s],
            dtype=float)
        for s in sigmas
    ])
    full = _extrapolate_to_zero(x, q)
    check = _extrapolate_to_zero(x[-2:], q[-2:])
    residual = float(np.max(np.abs(full - check)))
    scale = float(np.max(np.abs(full)))
    logger.verbose_print(f'σ → 1 limit of {kind}: {full.tolist()} (residual {residual:.3e})')
    if residual > LIMIT_TOLERANCE * scale:
        raise NonConvergent(
            f'σ → 1 extrapolants of {kind} differ by {residual:.3e} against {scale:.3e}')
    return LimitEstimate(value=full, residual=residual, sigmas=list(sigmas))


@dataclass
class CurvatureReport:
    """All curvature quantities at one surface point and order, with diagnostics."""

    z: Array
    sigma: float
    n: int
    directions: Array
    k_samples: Array
    h_volume: Optional[float] = None
    h_average: Optional[float] = None
    h_surface: Optional[float] = None
    tensors: Dict[str, SymTangentTensor] = field(default_factory=dict)
    k_sigma: Optional[float] = None
    k_double_integral: Optional[float] = None
    trace_residual: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def eigenvalues(self, representation: str) -> Array:
        """Get the eigenvalues of one tensor representation."""
        return self.tensors[representation].eigenvalues()


def curvature_report(
    scene: SurfaceScene,
    z: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    representations: Sequence[str] = ('angular', 'fullspace'),
    threads: int = 1,
) -> CurvatureReport:
    """
    Compute every curvature quantity at one point, sharing samples between routes.

    The angular tensor and the averaged H_σ use the same k samples, so their trace identity
    residual reflects rounding only.
    """
    _check_sigma(sigma)
    for rep in representations:
        if rep not in REPRESENTATIONS:
            raise ConfigError(f"unknown representation '{rep}'", 'representations')
    n = scene.dim
    frame = tangent_frame(scene, z)
    samples = directional_curvatures(scene, frame.z, sigma, spec, frame, threads)
    rays = ambient_ray_integrals(scene, frame.z, frame, sigma, spec)
    report = CurvatureReport(
        z=frame.z,
        sigma=sigma,
        n=n,
        directions=samples.grid.ambient,
        k_samples=samples.values,
        h_volume=_volume_mean(rays, n),
        h_average=_average_mean(samples, n),
    )
    report.tensors['angular'] = _tensor_from_samples(samples, sigma, n)
    if 'fullspace' in representations:
        report.tensors['fullspace'] = _tensor_from_rays(rays, frame, sigma, n)
    if 'surface' in representations:
        report.tensors['surface'] = _tensor_from_surface(scene, frame, sigma, spec)
        report.h_surface = mean_curvature_surface(scene, frame.z, sigma, spec)
    angular = report.tensors['angular']
    report.k_sigma = gaussian_curvature(angular)
    if n == 3:
        report.k_double_integral = gaussian_curvature_double_integral(samples, sigma)
    report.trace_residual = abs(report.h_average - angular.trace() / (n - 1))
    report.diagnostics = {
        'cancel_residual': max(samples.cancel_residual, rays.cancel_residual),
        'tail_bound': samples.tail_bound + rays.tail_bound,
        'nodes': samples.nodes + 2 * len(rays.values),
        'asymmetry': max(t.asymmetry for t in report.tensors.values()),
    }
    return report
