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

"""Principal-value quadrature: radial closed forms, angular rules and mesh surface integrals."""

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from functools import partial
import math
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
import warnings

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray
from scipy import integrate
from scipy import special

from .errors import CancellationFailure
from .errors import ConfigError
from .errors import NearSingularityUnresolved
from .errors import RepresentationUnavailable
from .errors import TruncationWarning
from .logger import logger
from .meshes import directed_edges
from .meshes import dunavant_rule
from .meshes import MeshScene
from .meshes import pn_control_points
from .meshes import pn_evaluate
from .surface import Array
from .surface import classify_points
from .surface import frame_from_normal
from .surface import SurfaceScene
from .surface import TangentFrame


Kernel = Callable[[Array], Array]

TAIL_HANDLING = ('analytic', 'truncate')
ANGULAR_RULES = ('jacobi', 'legendre')
PV_MODES = ('analytic', 'extrapolate')
MIN_NODE_COUNT = 8
DEFAULT_R_MAX_FACTOR = 1e4
CANCELLATION_TOLERANCE = 1e-10
TRUNCATION_TOLERANCE = 1e-6
TANGENCY_JITTER = 1e-7
TANGENCY_RETRIES = 3
# Cutoffs of the brute-force mode, as multiples of eps_cutoff
EPS_LADDER = (10.0, 1.0, 0.1, 0.01)
NORMAL_RAY_ANGLE = 1e-6
EDGE_NODES = 16
NEAR_FIELD_FACTOR = 3.0
REFINE_TOLERANCE = 1e-2


@dataclass(frozen=True)
class QuadratureSpec:
    """Truncation, cutoff and resolution parameters of every integrator."""

    eps_cutoff: float = 1e-3
    r_max: Optional[float] = None
    n_phi: int = 512
    n_dir: int = 256
    n_polar: int = 128
    mc_samples: int = 200000
    rng_seed: int = 0
    tail_handling: str = 'analytic'
    angular_rule: str = 'jacobi'
    pv_mode: str = 'analytic'
    near_rings: int = 2
    max_refine_depth: int = 12

    def __post_init__(self) -> None:
        """Check value ranges."""
        for name in ('n_phi', 'n_dir', 'n_polar', 'mc_samples'):
            if getattr(self, name) < MIN_NODE_COUNT:
                raise ConfigError(
                    f'must be at least {MIN_NODE_COUNT}, got {getattr(self, name)}',
                    f'quadrature.{name}')
        if self.n_phi % 2:
            raise ConfigError(f'must be even, got {self.n_phi}', 'quadrature.n_phi')
        if not self.eps_cutoff > 0.0:
            raise ConfigError(f'must be positive, got {self.eps_cutoff}', 'quadrature.eps_cutoff')
        if self.r_max is not None and not self.r_max > 0.0:
            raise ConfigError(f'must be positive, got {self.r_max}', 'quadrature.r_max')
        choices = {
            'tail_handling': TAIL_HANDLING,
            'angular_rule': ANGULAR_RULES,
            'pv_mode': PV_MODES,
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(
                    f"'{getattr(self, name)}' is not one of {', '.join(allowed)}",
                    f'quadrature.{name}')
        if self.near_rings < 1:
            raise ConfigError('must be at least 1', 'quadrature.near_rings')
        if self.max_refine_depth < 1:
            raise ConfigError('must be at least 1', 'quadrature.max_refine_depth')

    def radius(self, scene: SurfaceScene) -> float:
        """
        Get the outer truncation radius for a scene and check the scene-relative invariants.

        :raises ConfigError: if eps_cutoff >= scale or r_max <= 10·scale
        """
        if self.eps_cutoff >= scene.scale:
            raise ConfigError(
                f'must be smaller than the scene scale {scene.scale}', 'quadrature.eps_cutoff')
        r_max = DEFAULT_R_MAX_FACTOR * scene.scale if self.r_max is None else self.r_max
        if r_max <= 10.0 * scene.scale:
            raise ConfigError(
                f'must exceed 10 times the scene scale {scene.scale}', 'quadrature.r_max')
        return r_max

    def to_dict(self) -> Dict[str, Any]:
        """Get the parameters as a plain dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'QuadratureSpec':
        """
        Build a spec from a dictionary of overrides.

        :raises ConfigError: on unknown keys or wrong value types
        """
        known = {f.name: f for f in fields(cls)}
        values: Dict[str, Any] = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError('unknown quadrature parameter', f'quadrature.{key}')
            default = getattr(cls(), key)
            try:
                if value is None or isinstance(default, str):
                    values[key] = value
                elif isinstance(default, int) and not isinstance(default, bool):
                    if isinstance(value, float) and not value.is_integer():
                        raise ValueError(f'{value} is not an integer')
                    values[key] = int(value)
                else:
                    values[key] = float(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(str(e), f'quadrature.{key}')
        return cls(**values)


@dataclass(frozen=True)
class RadialPiecewise:
    """Piecewise-constant classifier sign along a ray, flipping at each crossing."""

    s0: int
    radii: Array
    sigma: float

    def signs(self) -> NDArray[np.int64]:
        """Get the signs s₀, …, s_k on the k + 1 intervals."""
        k = len(self.radii)
        return np.asarray(self.s0 * (-1) ** np.arange(k + 1), dtype=np.int64)


@dataclass(frozen=True)
class RadialPV:
    """Split principal value of one ray: finite part plus the coefficient of ε^{-σ}."""

    finite_part: float
    divergence_coeff: float
    tail: float


@dataclass(frozen=True)
class PVResult:
    """A principal-value integral together with its diagnostics."""

    value: float
    cancel_residual: float
    tail_bound: float
    nodes: int


def radial_pv(
    rp: RadialPiecewise,
    weight: float = 1.0,
    r_max: float = math.inf,
    tail_handling: str = 'analytic',
) -> RadialPV:
    """
    Integrate weight·s(r)·r^{-1-σ} over (ε, R) in closed form, keeping ε symbolic.

    Interval [a, b] with sign s contributes s·(a^{-σ} − b^{-σ})/σ; the a = ε term of the
    first interval is returned as the divergence coefficient.

    :param rp: the sign pattern along the ray
    :param weight: the angular weight of the ray
    :param r_max: the outer radius; crossings beyond it are ignored
    :param tail_handling: 'analytic' integrates the constant final sign to infinity,
        'truncate' stops at r_max
    :return: the split value and the signed tail term beyond r_max
    """
    finite, divergence, tail = radial_pv_batch(
        np.atleast_2d(np.asarray(rp.radii, dtype=float)),
        np.array([rp.s0]),
        np.array([weight]),
        rp.sigma,
        r_max,
        tail_handling,
    )
    return RadialPV(float(finite[0]), float(divergence[0]), float(tail[0]))


def radial_pv_batch(
    radii: Array,
    s0: ArrayLike,
    weights: ArrayLike,
    sigma: float,
    r_max: float = math.inf,
    tail_handling: str = 'analytic',
) -> Tuple[Array, Array, Array]:
    """
    Vectorized radial_pv over rays with NaN-padded sorted crossing radii.

    :return: finite parts, divergence coefficients and signed tails, each (m,)
    """
    r = np.asarray(radii, dtype=float)
    s = np.asarray(s0, dtype=float)
    w = np.asarray(weights, dtype=float)
    valid = np.isfinite(r) & (r <= r_max)
    k = valid.sum(axis=1)
    # s_{i-1} for the crossing at r_i is s₀(−1)^{i−1}
    alternate = (-1.0) ** np.arange(r.shape[1])
    with np.errstate(invalid='ignore', divide='ignore'):
        powers = np.where(valid, np.where(valid, r, 1.0) ** -sigma, 0.0)
    finite = -2.0 / sigma * s * w * (powers * alternate).sum(axis=1)
    divergence = s * w / sigma
    last = s * (-1.0) ** k
    tail = last * w * (r_max ** -sigma if math.isfinite(r_max) else 0.0) / sigma
    if tail_handling == 'truncate':
        finite = finite - tail
    return np.asarray(finite), np.asarray(divergence), np.asarray(tail)


def angular_rule_nodes(n_phi: int, sigma: float, rule: str = 'jacobi') -> Tuple[Array, Array]:
    """
    Get nodes ψ in (0, π/2) and weights for one half of a half-plane angular integral.

    The 'jacobi' rule absorbs the ψ^{-σ} singularity of near-tangent rays into the weights;
    the full node set {π/2 ± ψ} is symmetric about π/2 in both rules.

    :param n_phi: nodes over (0, π), even
    :return: ψ nodes and weights integrating smooth functions over (0, π/2)
    """
    half = n_phi // 2
    quarter = 0.25 * math.pi
    if rule == 'jacobi':
        x, w = special.roots_jacobi(half, 0.0, -sigma)
        psi = quarter * (1.0 + x)
        return np.asarray(psi), np.asarray(quarter ** (1.0 - sigma) * w * psi ** sigma)
    if rule == 'legendre':
        x, w = special.roots_legendre(n_phi)
        keep = x > 0.0
        return np.asarray(0.5 * math.pi * x[keep]), np.asarray(0.5 * math.pi * w[keep])
    raise ConfigError(f"unknown angular rule '{rule}'", 'quadrature.angular_rule')


def polar_rule_nodes(n: int, n_polar: int, sigma: float) -> Tuple[Array, Array]:
    """
    Get nodes t in (0, 1) for ∫ F(t)(1 − t²)^{(n−3)/2} dt with F ~ t^{-σ} at 0.

    t is the cosine between a ray and the normal; the same nodes serve ±t.
    """
    a = 0.5 * (n - 3)
    x, w = special.roots_jacobi(n_polar, a, -sigma)
    t = 0.5 * (1.0 + x)
    return np.asarray(t), np.asarray(2.0 ** (sigma - a - 1.0) * w * (1.0 + t) ** a * t ** sigma)


def sphere_grid(m: int, count: int, offset: float = 0.0) -> Tuple[Array, Array]:
    """
    Build a quadrature grid on the unit sphere S^m in R^(m+1).

    S^0 is the two points ±1 with unit weight; S^1 is a uniform circle; higher spheres are
    Gauss-Jacobi products over the last coordinate.

    :param count: points on each circle
    :param offset: azimuth shift in units of the circle step
    :return: points (M, m+1) and weights summing to the measure of S^m
    """
    if m == 0:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if m == 1:
        theta = 2.0 * math.pi * (np.arange(count) + offset) / count
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return pts, np.full(count, 2.0 * math.pi / count)
    a = 0.5 * (m - 2)
    t, wt = special.roots_jacobi(max(4, count // 2), a, a)
    sub, wsub = sphere_grid(m - 1, count, offset)
    scale = np.sqrt(1.0 - t * t)
    pts = np.concatenate(
        [t[:, None, None] * np.ones((1, len(sub), 1)), scale[:, None, None] * sub[None]],
        axis=2,
    ).reshape(-1, m + 1)
    return pts, np.asarray(np.outer(wt, wsub).ravel())


@dataclass(frozen=True)
class DirectionGrid:
    """Quadrature over the unit directions of a tangent space."""

    coords: Array
    ambient: Array
    weights: Array


def direction_grid(frame: TangentFrame, n_dir: int, offset: float = 0.0) -> DirectionGrid:
    """
    Build the direction grid on U(T_zS), with weights summing to its measure ω_{n−2}.

    For n = 2 this is {e, −e} with unit weights; for n = 3 a uniform circle of n_dir points.
    """
    m = len(frame.normal) - 2
    count = n_dir if m <= 1 else max(MIN_NODE_COUNT, int(round(n_dir ** (1.0 / m))))
    coords, weights = sphere_grid(m, count, offset)
    return DirectionGrid(coords=coords, ambient=frame.ambient(coords), weights=weights)


def cast_from_surface(
    scene: SurfaceScene,
    z: Array,
    dirs: Array,
    r_max: float,
) -> Tuple[Array, NDArray[np.bool_]]:
    """Get crossing radii (NaN-padded) and tangency flags of rays leaving z ∈ S."""
    hits = scene.ray_hits(z, dirs, r_max, start_on_surface=True)
    return hits.t, hits.tangent


def _pair_rays(
    scene: SurfaceScene,
    z: Array,
    make_dirs: Callable[[Array], Array],
    params: Array,
    r_max: float,
) -> Tuple[Array, Array]:
    """
    Cast mirrored ray pairs, jittering the parameter of pairs with a tangential ray.

    :param make_dirs: maps parameters (m,) to stacked directions (2m, n), upper rays first
    :return: crossing radii of upper and lower rays and the parameters actually used
    """
    p = params.copy()
    m = len(p)
    radii, tangent = cast_from_surface(scene, z, make_dirs(p), r_max)
    tangent = tangent.copy()
    for attempt in range(TANGENCY_RETRIES):
        bad = tangent[:m] | tangent[m:]
        if not bad.any():
            break
        logger.verbose_print(f'jittering {int(bad.sum())} tangential ray pair(s)')
        p[bad] += TANGENCY_JITTER * (attempt + 1)
        sub_r, sub_t = cast_from_surface(scene, z, make_dirs(p[bad]), r_max)
        idx = np.concatenate([np.nonzero(bad)[0], m + np.nonzero(bad)[0]])
        width = max(radii.shape[1], sub_r.shape[1])
        radii = _widen(radii, width)
        radii[idx] = _widen(sub_r, width)
        tangent[idx] = sub_t
    else:
        if (tangent[:m] | tangent[m:]).any():
            raise CancellationFailure('tangential rays persist after jittering the angular nodes')
    return radii, p


def _widen(radii: Array, width: int) -> Array:
    if radii.shape[1] >= width:
        return radii
    pad = np.full((radii.shape[0], width - radii.shape[1]), np.nan)
    return np.concatenate([radii, pad], axis=1)


def _check_cancellation(divergence: Array) -> float:
    residual = abs(float(divergence.sum()))
    scale = float(np.abs(divergence).sum())
    if residual > CANCELLATION_TOLERANCE * scale:
        raise CancellationFailure(
            f'ε-divergence residual {residual:.3e} exceeds tolerance (scale {scale:.3e})')
    return residual


def _tail_check(value: float, tail_bound: float, tail_handling: str) -> None:
    if tail_handling == 'truncate' and tail_bound > TRUNCATION_TOLERANCE * abs(value):
        warnings.warn(
            f'truncated tail {tail_bound:.3e} is not negligible against {value:.6e}',
            TruncationWarning,
        )


def halfplane_pv_integral(
    scene: SurfaceScene,
    z: ArrayLike,
    frame: TangentFrame,
    e: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
    nodes: Optional[Tuple[Array, Array]] = None,
) -> PVResult:
    """
    Integrate r^{-1-σ} sin^{n−2}φ χ̂ over the half-plane spanned by e and n(z).

    Rays a(φ) = cos φ·n + sin φ·e leave z at the mirrored angles φ = π/2 ∓ ψ. Near z the
    classifier is −sign(a·n), so the ε^{-σ} coefficients of each mirrored pair cancel
    exactly and the limit ε → 0 is taken in closed form.

    :param e: unit tangent direction (ambient coordinates)
    :param nodes: optional (ψ, weights) replacing the configured angular rule
    :return: the value with its cancellation residual and tail bound
    """
    if spec.pv_mode == 'extrapolate':
        return halfplane_pv_extrapolated(scene, z, frame, e, sigma, spec)
    base = np.asarray(z, dtype=float)
    direction = np.asarray(e, dtype=float)
    normal = frame.normal
    n = scene.dim
    r_max = spec.radius(scene)
    if nodes is None:
        psi, w_psi = angular_rule_nodes(spec.n_phi, sigma, spec.angular_rule)
    else:
        psi, w_psi = nodes

    def make_dirs(p: Array) -> Array:
        up = np.sin(p)[:, None] * normal + np.cos(p)[:, None] * direction
        down = -np.sin(p)[:, None] * normal + np.cos(p)[:, None] * direction
        return np.asarray(np.concatenate([up, down]))

    radii, psi_used = _pair_rays(scene, base, make_dirs, np.asarray(psi, dtype=float), r_max)
    weights = np.tile(w_psi * np.cos(psi_used) ** (n - 2), 2)
    m = len(psi_used)
    s0 = np.concatenate([-np.ones(m), np.ones(m)])
    finite, divergence, tail = radial_pv_batch(
        radii, s0, weights, sigma, r_max, spec.tail_handling)
    residual = _check_cancellation(divergence)
    value = float(finite.sum())
    tail_bound = float(np.abs(tail).sum())
    _tail_check(value, tail_bound, spec.tail_handling)
    return PVResult(value=value, cancel_residual=residual, tail_bound=tail_bound, nodes=2 * m)


def _interval_integral(s_start: float, radii: Array, lo: float, hi: float, sigma: float) -> float:
    """Integrate s(r)·r^{-1-σ} over (lo, hi) with sign flips at the given radii."""
    breaks = np.concatenate(([lo], radii, [hi]))
    signs = s_start * (-1.0) ** np.arange(len(breaks) - 1)
    ends = np.where(np.isfinite(breaks), breaks, 1.0) ** -sigma
    ends[~np.isfinite(breaks)] = 0.0
    return float((signs * (ends[:-1] - ends[1:])).sum() / sigma)


def halfplane_pv_extrapolated(
    scene: SurfaceScene,
    z: ArrayLike,
    frame: TangentFrame,
    e: ArrayLike,
    sigma: float,
    spec: QuadratureSpec,
) -> PVResult:
    """
    Evaluate the half-plane integral by brute force at finite ε and extrapolate to ε → 0.

    Each cutoff is integrated adaptively in ψ over mirrored ray pairs; the values are fitted
    by least squares in {1, ε^{1−σ}, ε^{2−σ}}. Kept as an independent cross-check.
    """
    base = np.asarray(z, dtype=float)
    direction = np.asarray(e, dtype=float)
    normal = frame.normal
    n = scene.dim
    r_max = spec.radius(scene)
    hi = math.inf if spec.tail_handling == 'analytic' else r_max
    cache: Dict[float, Tuple[Array, Array]] = {}

    def crossings_at(psi: float) -> Tuple[Array, Array]:
        if psi not in cache:
            dirs = np.array([
                math.sin(psi) * normal + math.cos(psi) * direction,
                -math.sin(psi) * normal + math.cos(psi) * direction,
            ])
            radii, _ = cast_from_surface(scene, base, dirs, r_max)
            up = radii[0][np.isfinite(radii[0])]
            down = radii[1][np.isfinite(radii[1])]
            cache[psi] = (up, down)
        return cache[psi]

    def pair_value(psi: float, eps: float) -> float:
        total = 0.0
        for s0, radii in zip((-1.0, 1.0), crossings_at(psi)):
            inner = int(np.sum(radii < eps))
            total += _interval_integral(s0 * (-1.0) ** inner, radii[inner:], eps, hi, sigma)
        return total * math.cos(psi) ** (n - 2)

    levels = spec.eps_cutoff * np.array(EPS_LADDER)
    values = []
    for eps in levels:
        value, _ = integrate.quad(
            pair_value, 0.0, 0.5 * math.pi, args=(eps,), limit=400, epsabs=1e-12, epsrel=1e-10)
        values.append(value)
    design = np.stack([np.ones_like(levels), levels ** (1.0 - sigma), levels ** (2.0 - sigma)],
                      axis=1)
    coeffs, *_ = np.linalg.lstsq(design, np.array(values), rcond=None)
    residual = float(np.abs(design @ coeffs - np.array(values)).max())
    logger.verbose_print(
        f'extrapolated over ε = {list(levels)}: {values} -> {coeffs[0]!r} '
        f'({len(cache)} ray pairs)')
    return PVResult(
        value=float(coeffs[0]), cancel_residual=residual, tail_bound=0.0, nodes=2 * len(cache))


@dataclass(frozen=True)
class AmbientRays:
    """Pair-summed radial integrals on the ambient grid t·n + √(1−t²)·ω̂ around z."""

    values: Array
    weights: Array
    coords: Array
    cancel_residual: float
    tail_bound: float


def ambient_ray_integrals(
    scene: SurfaceScene,
    z: ArrayLike,
    frame: TangentFrame,
    sigma: float,
    spec: QuadratureSpec,
) -> AmbientRays:
    """
    Integrate χ̂·r^{-1-σ} along every ray of a grid on the unit sphere of R^n.

    Rays at polar cosines ±t share the tangent direction ω̂, which pairs their divergences.
    Azimuths are offset by half a step from the averaging grid.

    :return: per (t, ω̂) node the summed finite part of both rays, with the product weights
        and the tangent coordinates of ω̂
    """
    base = np.asarray(z, dtype=float)
    n = scene.dim
    r_max = spec.radius(scene)
    t, wt = polar_rule_nodes(n, spec.n_polar, sigma)
    grid = direction_grid(frame, spec.n_dir, offset=0.5)
    nt = len(t)
    nw = len(grid.weights)
    t_all = np.repeat(t, nw)
    omega = np.tile(grid.ambient, (nt, 1))

    def make_dirs(p: Array, rows: Optional[NDArray[np.int64]] = None) -> Array:
        om = omega if rows is None else omega[rows]
        side = np.sqrt(1.0 - p * p)[:, None] * om
        return np.asarray(np.concatenate([
            p[:, None] * frame.normal + side,
            -p[:, None] * frame.normal + side,
        ]))

    chunks: List[Array] = []
    used: List[Array] = []
    step = max(1, 65536 // max(nw, 1)) * nw
    for lo in range(0, len(t_all), step):
        rows = np.arange(lo, min(lo + step, len(t_all)))
        part, p = _pair_rays(
            scene, base, partial(make_dirs, rows=rows), t_all[rows], r_max)
        chunks.append(part)
        used.append(p)
    width = max(c.shape[1] for c in chunks)
    uppers = [_widen(c[:len(c) // 2], width) for c in chunks]
    lowers = [_widen(c[len(c) // 2:], width) for c in chunks]
    radii = np.concatenate(uppers + lowers)
    weights = np.repeat(wt, nw) * np.tile(grid.weights, nt)
    m = len(t_all)
    s0 = np.concatenate([-np.ones(m), np.ones(m)])
    finite, divergence, tail = radial_pv_batch(
        radii, s0, np.tile(weights, 2), sigma, r_max, spec.tail_handling)
    residual = _check_cancellation(divergence)
    values = finite[:m] + finite[m:]
    tail_bound = float(np.abs(tail).sum())
    _tail_check(float(values.sum()), tail_bound, spec.tail_handling)
    coords = np.tile(grid.coords, (nt, 1))
    # Rays along ±n(z) have no tangent direction
    along_normal = np.concatenate(used) > math.cos(NORMAL_RAY_ANGLE)
    coords[along_normal] = 0.0
    return AmbientRays(
        values=values, weights=weights, coords=coords,
        cancel_residual=residual, tail_bound=tail_bound)


def scalar_kernel(coords: Array) -> Array:
    """Get the constant kernel 1 for a batch of tangent directions."""
    return np.ones((len(coords), 1))


def tensor_kernel(sigma: float, n: int) -> Kernel:
    """
    Get the kernel ((n+σ) ê⊗ê − 1) acting on tangent directions.

    Zero directions (points on the normal line) keep only the −1 term.
    """
    eye = np.eye(n - 1)

    def kernel(coords: Array) -> Array:
        norm = np.linalg.norm(coords, axis=1, keepdims=True)
        unit = np.divide(coords, norm, out=np.zeros_like(coords), where=norm > 0.0)
        outer = np.einsum('mi,mj->mij', unit, unit)
        return np.asarray(((n + sigma) * outer - eye).reshape(len(coords), -1))

    return kernel


@dataclass(frozen=True)
class SurfaceIntegral:
    """Surface integral of (z−y)·ν/|z−y|^{n+σ} against a kernel, split by region."""

    value: Array
    near: Array
    far: Array
    depth: int
    refined: int


def _integrand(
    z: Array,
    frame: TangentFrame,
    pos: Array,
    area: Array,
    sigma: float,
    kernel: Kernel,
) -> Array:
    """Evaluate (z−y)·A/|z−y|^{3+σ}·K(ê) at positions (..., 3) with area vectors A."""
    delta = z - pos
    dist = np.linalg.norm(delta, axis=-1)
    scalar = np.einsum('...k,...k->...', delta, area) / dist ** (3.0 + sigma)
    coords = frame.tangent_coordinates(-delta.reshape(-1, 3))
    values = kernel(coords).reshape(*scalar.shape, -1)
    return np.asarray(scalar[..., None] * values)


def _near_patch_integral(
    mesh: MeshScene,
    frame: TangentFrame,
    shape: Array,
    patch: NDArray[np.int64],
    sigma: float,
    kernel: Kernel,
) -> Array:
    """
    Integrate over the projected k-ring patch against the osculating quadric h = ½xᵀLx.

    On the quadric (z−y)·ν dA = ½Q ρ² dx with Q = θ̂ᵀLθ̂, so the radial integral has the
    closed form ½Q R^{1−σ}/(1−σ)·₂F₁((3+σ)/2, (1−σ)/2; (3−σ)/2; −Q²R²/4); the angular
    integral runs along the patch boundary.
    """
    edges = directed_edges(mesh.faces[patch])
    pairs = {tuple(edge) for edge in edges.tolist()}
    boundary = np.array([edge for edge in edges.tolist() if (edge[1], edge[0]) not in pairs])
    pa = frame.tangent_coordinates(mesh.vertices[boundary[:, 0]] - frame.z)
    pb = frame.tangent_coordinates(mesh.vertices[boundary[:, 1]] - frame.z)
    s, ws = special.roots_legendre(EDGE_NODES)
    s = 0.5 * (1.0 + s)
    ws = 0.5 * ws
    pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
    radius = np.linalg.norm(pts, axis=-1)
    theta = pts / radius[..., None]
    cross = pa[:, 0] * pb[:, 1] - pa[:, 1] * pb[:, 0]
    dtheta = cross[:, None] / radius ** 2
    q = np.einsum('esi,ij,esj->es', theta, shape, theta)
    radial = (
        0.5 * q * radius ** (1.0 - sigma) / (1.0 - sigma)
        * special.hyp2f1(
            0.5 * (3.0 + sigma), 0.5 * (1.0 - sigma), 0.5 * (3.0 - sigma),
            -0.25 * q * q * radius * radius)
    )
    values = kernel(theta.reshape(-1, 2)).reshape(*radial.shape, -1)
    handed = float(np.sign(np.linalg.det(np.vstack([frame.tangents, frame.normal]))))
    total = np.einsum('es,es,esk->k', dtheta * ws[None, :], radial, values)
    return np.asarray(handed * total)


def _far_signs(
    mesh: MeshScene,
    z: Array,
    normal: Array,
    faces: NDArray[np.int64],
) -> Array:
    """Get ±1 per face so that ±n(y) is the outward normal of the region where χ̂ = +1."""
    if mesh.closed:
        return np.ones(len(faces))
    corners = mesh.vertices[mesh.faces[faces]]
    centroid = corners.mean(axis=1)
    nrm = mesh.normals[mesh.faces[faces]].sum(axis=1)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    inner = centroid - 1e-6 * mesh.edge_length() * nrm
    labels = classify_points(mesh, z, normal, inner)
    return np.where(labels > 0, 1.0, -1.0)


def _subdivide(corners: Array) -> Array:
    """Split barycentric triangles (I, 3, 3) into four children each (4I, 3, 3)."""
    c0, c1, c2 = corners[:, 0], corners[:, 1], corners[:, 2]
    m01 = 0.5 * (c0 + c1)
    m12 = 0.5 * (c1 + c2)
    m20 = 0.5 * (c2 + c0)
    children = np.stack([
        np.stack([c0, m01, m20], axis=1),
        np.stack([m01, c1, m12], axis=1),
        np.stack([m20, m12, c2], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ], axis=1)
    return np.asarray(children.reshape(-1, 3, 3))


def surface_integral(
    mesh: SurfaceScene,
    z: ArrayLike,
    kernel: Kernel,
    sigma: float,
    spec: QuadratureSpec,
) -> SurfaceIntegral:
    """
    Integrate (z−y)·n_A(y)/|z−y|^{3+σ}·K(ê_z(y)) over a triangle mesh.

    n_A is the outward normal of the region where the classifier is +1. The k-ring of z is
    integrated against the fitted osculating quadric; the other triangles are evaluated as
    curved PN patches with a degree-4 rule, refining 4-fold near z until coarse and fine
    values agree to 1 %.

    :raises RepresentationUnavailable: if the scene is not a triangle mesh
    :raises NearSingularityUnresolved: if refinement exceeds spec.max_refine_depth
    """
    if not isinstance(mesh, MeshScene):
        raise RepresentationUnavailable(
            f'surface integrals need a triangle mesh, got {mesh.name()}')
    base = np.asarray(z, dtype=float)
    vertex = mesh.nearest_vertex(base)
    normal = np.asarray(mesh.normal(base))
    frame = frame_from_normal(base, normal)
    tangents, fitted = mesh.fit_shape_operator(vertex, spec.near_rings)
    ambient_shape = tangents.T @ fitted @ tangents
    shape = frame.tangents @ ambient_shape @ frame.tangents.T

    ring = mesh.k_ring(vertex, spec.near_rings)
    in_ring = np.isin(mesh.faces, list(ring)).all(axis=1)
    patch = np.nonzero(in_ring)[0]
    far_faces = np.nonzero(~in_ring)[0]
    near = _near_patch_integral(mesh, frame, shape, patch, sigma, kernel)

    bary, wq = dunavant_rule()
    ctrl = pn_control_points(mesh.vertices[mesh.faces[far_faces]],
                             mesh.normals[mesh.faces[far_faces]])
    pos, area = pn_evaluate(ctrl, bary)
    signs = _far_signs(mesh, base, normal, far_faces)
    values = 0.5 * np.einsum(
        'q,fqk->fk', wq, _integrand(base, frame, pos, area, sigma, kernel))
    values *= signs[:, None]

    h = mesh.edge_length()
    centroid = mesh.vertices[mesh.faces[far_faces]].mean(axis=1)
    close = np.linalg.norm(centroid - base, axis=1) < NEAR_FIELD_FACTOR * h
    floor = 1e-9 * h ** (1.0 - sigma)
    items = np.nonzero(close)[0]
    corners = np.broadcast_to(np.eye(3), (len(items), 3, 3)).copy()
    coarse = values[items]
    values[items] = 0.0
    depth = 0
    refined = 0
    while len(items):
        depth += 1
        if depth > spec.max_refine_depth:
            raise NearSingularityUnresolved(
                f'{len(items)} triangle(s) still unresolved at depth {spec.max_refine_depth}')
        children = _subdivide(corners)
        owners = np.repeat(items, 4)
        sub_ctrl = {k: v[owners] for k, v in ctrl.items()}
        sub_pos, sub_area = pn_evaluate(sub_ctrl, np.einsum('qa,iak->iqk', bary, children))
        child_vals = 0.25 ** depth * 0.5 * np.einsum(
            'q,iqk->ik', wq, _integrand(base, frame, sub_pos, sub_area, sigma, kernel))
        child_vals *= signs[owners][:, None]
        fine = child_vals.reshape(len(items), 4, -1).sum(axis=1)
        error = np.abs(fine - coarse).max(axis=1)
        done = error <= REFINE_TOLERANCE * np.abs(fine).max(axis=1) + floor
        refined += len(items)
        np.add.at(values, items[done], fine[done])
        keep = np.repeat(~done, 4)
        items = owners[keep]
        corners = children[keep]
        coarse = child_vals[keep]
    far = values.sum(axis=0)
    logger.verbose_print(
        f'surface integral at vertex {vertex}: {len(patch)} patch faces, '
        f'{len(far_faces)} far faces, {refined} refinements, depth {depth}')
    return SurfaceIntegral(value=near + far, near=near, far=far, depth=depth, refined=refined)


def integrand_decay_exponent(mesh: MeshScene, vertex: int, sigma: float, rings: int = 6) -> float:
    """
    Fit the power of |z−y| in the magnitude of (z−y)·n(y)/|z−y|^{3+σ} near a vertex.

    On a C² surface the numerator is O(|z−y|²), so the fit should give 2 − n − σ.
    """
    z = mesh.vertices[vertex]
    ring = sorted(mesh.k_ring(vertex, rings) - {vertex})
    ys = mesh.vertices[ring]
    delta = z - ys
    dist = np.linalg.norm(delta, axis=1)
    magnitude = np.abs(np.einsum('ij,ij->i', delta, mesh.normals[ring])) / dist ** (3.0 + sigma)
    slope, _ = np.polyfit(np.log(dist), np.log(magnitude), 1)
    return float(slope)
