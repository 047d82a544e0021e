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

"""Oriented surfaces, ray crossings, the point-pair classifier and tangent frames."""

from dataclasses import dataclass
import math
from typing import Callable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray

from .errors import DegenerateProjection
from .errors import EndpointOnSurface
from .errors import PointNotOnSurface
from .errors import SceneError
from .errors import TangencyDetected


Array = NDArray[np.float64]
LevelFunction = Callable[[Array], Array]

# Relative to the scene scale
ON_SURFACE_TOLERANCE = 1e-9
# Relative to |∇f|
TANGENCY_TOLERANCE = 1e-8
DEGENERATE_PROJECTION_TOLERANCE = 1e-12
RAY_CHUNK = 4096
MIN_MARCH_SAMPLES = 256
MARCH_STEP_FRACTION = 0.05
BISECTION_STEPS = 60
# Marching runs over a slightly larger ball so roots on its boundary stay bracketed
MARCH_BALL_MARGIN = 1.01


@dataclass(frozen=True)
class RayHits:
    """Crossings of a batch of rays, padded with NaN to a common width."""

    t: Array
    count: NDArray[np.int64]
    tangent: NDArray[np.bool_]

    def parity(self) -> NDArray[np.int64]:
        """Get the crossing-count parity of each ray."""
        return self.count % 2


@dataclass(frozen=True)
class CrossingList:
    """Sorted crossing parameters of one ray from a base point."""

    z: Array
    d: Array
    t: Array
    tangential: bool


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal tangent vectors and the unit normal at a surface point."""

    z: Array
    tangents: Array
    normal: Array

    def tangent_coordinates(self, v: ArrayLike) -> Array:
        """Get the components of ambient vectors along the tangent vectors."""
        return np.asarray(v, dtype=float) @ self.tangents.T

    def ambient(self, coords: ArrayLike) -> Array:
        """Lift tangent components back to ambient vectors."""
        return np.asarray(coords, dtype=float) @ self.tangents


@dataclass(frozen=True)
class SymTangentTensor:
    """Symmetric tensor on the tangent space, stored in the components of a frame."""

    frame: TangentFrame
    matrix: Array
    asymmetry: float = 0.0

    @staticmethod
    def symmetrized(frame: TangentFrame, matrix: ArrayLike) -> 'SymTangentTensor':
        """
        Symmetrize a component matrix, keeping the size of its antisymmetric part.

        :param frame: the tangent frame the components refer to
        :param matrix: the (n-1)x(n-1) components
        :return: the tensor, with asymmetry = max |M - Mᵀ|
        """
        m = np.asarray(matrix, dtype=float)
        asymmetry = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        return SymTangentTensor(frame=frame, matrix=0.5 * (m + m.T), asymmetry=asymmetry)

    def ambient(self) -> Array:
        """Lift to an n x n ambient tensor, which annihilates the normal."""
        t = self.frame.tangents
        return np.asarray(t.T @ self.matrix @ t)

    def trace(self) -> float:
        """Get the trace."""
        return float(np.trace(self.matrix))

    def determinant(self) -> float:
        """Get the determinant."""
        return float(np.linalg.det(self.matrix))

    def eigenvalues(self) -> Array:
        """Get the eigenvalues in ascending order."""
        return np.asarray(np.linalg.eigvalsh(self.matrix))

    def rotated(self, rotation: ArrayLike) -> 'SymTangentTensor':
        """
        Express the tensor in the frame whose tangent vectors are R·e_i.

        :param rotation: an orthogonal (n-1)x(n-1) matrix acting on tangent components
        :return: the same tensor with components R M Rᵀ
        """
        r = np.asarray(rotation, dtype=float)
        frame = TangentFrame(z=self.frame.z, tangents=r @ self.frame.tangents,
                             normal=self.frame.normal)
        return SymTangentTensor(frame=frame, matrix=r @ self.matrix @ r.T,
                                asymmetry=self.asymmetry)


def pack_hits(
    m: int,
    ray_ids: NDArray[np.int64],
    roots: Array,
    tangent: NDArray[np.bool_],
) -> RayHits:
    """
    Gather unordered (ray, t) roots into sorted, NaN-padded rows.

    :param m: the number of rays
    :param ray_ids: the ray index of every root
    :param roots: the ray parameter of every root
    :param tangent: per-ray tangency flags
    :return: the packed hits
    """
    count = np.bincount(ray_ids, minlength=m).astype(np.int64)
    width = int(count.max()) if m and len(roots) else 0
    t = np.full((m, width), np.nan)
    if len(roots):
        order = np.lexsort((roots, ray_ids))
        ids = ray_ids[order]
        starts = np.concatenate(([0], np.cumsum(count)[:-1]))
        slots = np.arange(len(ids)) - starts[ids]
        t[ids, slots] = roots[order]
    return RayHits(t=t, count=count, tangent=tangent)


def broadcast_rays(
    origins: ArrayLike,
    dirs: ArrayLike,
    t_max: ArrayLike,
    dim: int,
) -> Tuple[Array, Array, Array]:
    """
    Broadcast ray origins, directions and lengths to matching (m, dim) / (m,) arrays.

    :return: (origins, dirs, t_max)
    """
    d = np.atleast_2d(np.asarray(dirs, dtype=float))
    if d.shape[1] != dim:
        raise SceneError(f'ray directions have dimension {d.shape[1]}, expected {dim}')
    o = np.broadcast_to(np.asarray(origins, dtype=float), d.shape)
    tm = np.broadcast_to(np.asarray(t_max, dtype=float), (d.shape[0],))
    return o, d, tm


def ball_interval(
    origins: Array,
    dirs: Array,
    center: Array,
    radius: float,
) -> Tuple[Array, Array]:
    """
    Intersect rays with a ball.

    :return: entry and exit parameters, NaN where the ray misses the ball
    """
    oc = origins - center
    b = np.einsum('ij,ij->i', oc, dirs)
    c0 = np.einsum('ij,ij->i', oc, oc) - radius * radius
    disc = b * b - c0
    with np.errstate(invalid='ignore'):
        root = np.sqrt(disc)
    root[disc < 0.0] = np.nan
    return -b - root, -b + root


class SurfaceScene:
    """Oriented (n-1)-surface in R^n answering crossing and normal queries."""

    def __init__(self, dim: int, scale: float, closed: bool) -> None:
        """
        Create a SurfaceScene.

        :param dim: the ambient dimension n
        :param scale: the length scale used for tolerances and default truncation
        :param closed: whether the surface bounds a region
        """
        if dim < 2:
            raise SceneError(f'ambient dimension must be at least 2, got {dim}', 'scene')
        if not scale > 0.0:
            raise SceneError(f'scene scale must be positive, got {scale}', 'scene')
        self.dim = dim
        self.scale = scale
        self.closed = closed

    @property
    def tolerance(self) -> float:
        """Get the on-surface membership tolerance."""
        return ON_SURFACE_TOLERANCE * self.scale

    def name(self) -> str:
        """Get the scene name."""
        raise NotImplementedError  # pragma: no cover

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:
        """Get a ball containing every crossing, or None for unbounded surfaces."""
        raise NotImplementedError  # pragma: no cover

    def normal(self, z: ArrayLike) -> Array:
        """
        Get the orientation unit normal at points on the surface.

        :param z: one point (n,) or a batch (m, n)
        :return: unit normals of the same shape
        """
        raise NotImplementedError  # pragma: no cover

    def on_surface(self, x: ArrayLike) -> bool:
        """Check whether a point lies on the surface within the scene tolerance."""
        raise NotImplementedError  # pragma: no cover

    def ray_hits(
        self,
        origins: ArrayLike,
        dirs: ArrayLike,
        t_max: ArrayLike,
        start_on_surface: bool = False,
    ) -> RayHits:
        """
        Find all transversal crossings with 0 < t <= t_max of a batch of rays.

        :param origins: ray origins (n,) or (m, n)
        :param dirs: unit directions (m, n)
        :param t_max: ray lengths, scalar or (m,)
        :param start_on_surface: the origins lie on the surface, so the crossing at t = 0
            is excluded
        :return: the packed hits
        """
        raise NotImplementedError  # pragma: no cover

    def contains(self, x: ArrayLike) -> NDArray[np.bool_]:
        """
        Check whether points lie in the region bounded by a closed surface.

        :param x: one point (n,) or a batch (m, n)
        :return: membership per point
        """
        raise NotImplementedError  # pragma: no cover

    def project(self, x: ArrayLike) -> Array:
        """Move a point near the surface onto it."""
        raise NotImplementedError  # pragma: no cover


class LevelSetScene(SurfaceScene):
    """Surface {f = 0} with orientation ∇f/|∇f|; f < 0 is the enclosed side."""

    def level(self, x: Array) -> Array:
        """Evaluate f on a batch (m, n) of points."""
        raise NotImplementedError  # pragma: no cover

    def gradient(self, x: Array) -> Array:
        """Evaluate ∇f on a batch (m, n) of points."""
        raise NotImplementedError  # pragma: no cover

    def hessian(self, x: Array) -> Array:
        """Evaluate the Hessian of f on a batch (m, n) of points."""
        raise NotImplementedError  # pragma: no cover

    def normal(self, z: ArrayLike) -> Array:  # noqa: D102
        pts = np.asarray(z, dtype=float)
        g = self.gradient(np.atleast_2d(pts))
        g = g / np.linalg.norm(g, axis=1, keepdims=True)
        return g.reshape(pts.shape)

    def distance_estimate(self, x: ArrayLike) -> Array:
        """Estimate the distance to the surface as |f|/|∇f|."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.linalg.norm(self.gradient(pts), axis=1)
        return np.abs(self.level(pts)) / np.maximum(g, np.finfo(float).tiny)

    def on_surface(self, x: ArrayLike) -> bool:  # noqa: D102
        return bool(self.distance_estimate(x)[0] <= self.tolerance)

    def contains(self, x: ArrayLike) -> NDArray[np.bool_]:  # noqa: D102
        pts = np.asarray(x, dtype=float)
        inside = self.level(np.atleast_2d(pts)) < 0.0
        return inside

    def project(self, x: ArrayLike) -> Array:  # noqa: D102
        p = np.array(x, dtype=float).reshape(1, -1)
        for _ in range(50):
            g = self.gradient(p)
            f = self.level(p)
            p = p - (f / np.einsum('ij,ij->i', g, g))[:, None] * g
            if self.distance_estimate(p)[0] <= 1e-15 * self.scale:
                break
        if not self.on_surface(p[0]):
            raise PointNotOnSurface(f'could not project {list(np.ravel(x))} onto {self.name()}')
        return p[0]


class SphereScene(LevelSetScene):
    """Sphere of radius ρ, outward normal unless inward is set."""

    def __init__(
        self,
        center: ArrayLike,
        radius: float,
        inward: bool = False,
    ) -> None:
        """Create a SphereScene."""
        c = np.asarray(center, dtype=float)
        if not radius > 0.0:
            raise SceneError(f'sphere radius must be positive, got {radius}', 'scene.r')
        super().__init__(dim=len(c), scale=radius, closed=True)
        self.center = c
        self.radius = radius
        self.inward = inward
        self.__orient = -1.0 if inward else 1.0

    def name(self) -> str:  # noqa: D102
        return 'sphere'

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        return self.center, self.radius

    def level(self, x: Array) -> Array:  # noqa: D102
        d = x - self.center
        return self.__orient * 0.5 * (np.einsum('ij,ij->i', d, d) - self.radius ** 2) / self.radius

    def gradient(self, x: Array) -> Array:  # noqa: D102
        return self.__orient * (x - self.center) / self.radius

    def hessian(self, x: Array) -> Array:  # noqa: D102
        eye = np.eye(self.dim) * self.__orient / self.radius
        return np.broadcast_to(eye, (len(x), self.dim, self.dim)).copy()

    def on_surface(self, x: ArrayLike) -> bool:  # noqa: D102
        r = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        return abs(r - self.radius) <= self.tolerance

    def contains(self, x: ArrayLike) -> NDArray[np.bool_]:  # noqa: D102
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) < self.radius

    def project(self, x: ArrayLike) -> Array:  # noqa: D102
        d = np.asarray(x, dtype=float) - self.center
        r = float(np.linalg.norm(d))
        if r == 0.0:
            raise PointNotOnSurface('cannot project the sphere center onto the sphere')
        return self.center + self.radius * d / r

    def ray_hits(  # noqa: D102
        self,
        origins: ArrayLike,
        dirs: ArrayLike,
        t_max: ArrayLike,
        start_on_surface: bool = False,
    ) -> RayHits:
        o, d, tm = broadcast_rays(origins, dirs, t_max, self.dim)
        oc = o - self.center
        b = np.einsum('ij,ij->i', oc, d)
        if start_on_surface:
            # The t = 0 root is the base point itself
            tangent = np.abs(b) < TANGENCY_TOLERANCE * self.radius
            roots = (-2.0 * b)[:, None]
            roots[tangent] = np.nan
        else:
            c0 = np.einsum('ij,ij->i', oc, oc) - self.radius ** 2
            disc = b * b - c0
            with np.errstate(invalid='ignore'):
                root = np.sqrt(disc)
            tangent = (disc >= 0.0) & (root < TANGENCY_TOLERANCE * self.radius)
            roots = np.stack((-b - root, -b + root), axis=1)
            roots[(disc < 0.0) | tangent] = np.nan
        keep = (roots > 0.0) & (roots <= tm[:, None])
        ray_ids, slot = np.nonzero(keep)
        return pack_hits(len(d), ray_ids, roots[ray_ids, slot], tangent)


class PlaneScene(LevelSetScene):
    """Hyperplane through a point with a given unit normal."""

    def __init__(
        self,
        point: ArrayLike,
        normal: ArrayLike,
        scale: float = 1.0,
    ) -> None:
        """Create a PlaneScene; the normal is normalized."""
        nu = np.asarray(normal, dtype=float)
        norm = float(np.linalg.norm(nu))
        if norm == 0.0:
            raise SceneError('plane normal must be nonzero', 'scene.normal')
        super().__init__(dim=len(nu), scale=scale, closed=False)
        self.point = np.asarray(point, dtype=float)
        self.unit_normal = nu / norm

    def name(self) -> str:  # noqa: D102
        return 'plane'

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        return None

    def level(self, x: Array) -> Array:  # noqa: D102
        return np.asarray((x - self.point) @ self.unit_normal)

    def gradient(self, x: Array) -> Array:  # noqa: D102
        return np.broadcast_to(self.unit_normal, x.shape).copy()

    def hessian(self, x: Array) -> Array:  # noqa: D102
        return np.zeros((len(x), self.dim, self.dim))

    def ray_hits(  # noqa: D102
        self,
        origins: ArrayLike,
        dirs: ArrayLike,
        t_max: ArrayLike,
        start_on_surface: bool = False,
    ) -> RayHits:
        o, d, tm = broadcast_rays(origins, dirs, t_max, self.dim)
        denom = d @ self.unit_normal
        dist = (o - self.point) @ self.unit_normal
        parallel = np.abs(denom) < TANGENCY_TOLERANCE
        tangent = parallel & (np.abs(dist) <= self.tolerance)
        with np.errstate(divide='ignore', invalid='ignore'):
            t = -dist / denom
        if start_on_surface:
            t[:] = np.nan
        keep = ~parallel & (t > 0.0) & (t <= tm)
        ray_ids = np.nonzero(keep)[0]
        return pack_hits(len(d), ray_ids, t[ray_ids], tangent)


class ImplicitScene(LevelSetScene):
    """
    Level set of a user function, found by sign-change marching and bisection.

    The marching step never exceeds 5% of the declared feature scale (a lower bound on the
    radius of curvature), so no pair of roots can hide inside one step.
    """

    def __init__(
        self,
        dim: int,
        func: LevelFunction,
        grad: LevelFunction,
        hess: Optional[LevelFunction] = None,
        feature_scale: float = 1.0,
        center: Optional[ArrayLike] = None,
        radius: Optional[float] = None,
        closed: bool = True,
        far_plane: Optional[Tuple[ArrayLike, ArrayLike]] = None,
        label: str = 'implicit',
    ) -> None:
        """
        Create an ImplicitScene.

        :param dim: the ambient dimension
        :param func: f, evaluated on (m, n) batches
        :param grad: ∇f, evaluated on (m, n) batches
        :param hess: the Hessian of f, (m, n, n), needed only for classical tensors
        :param feature_scale: lower bound on the surface's radius of curvature
        :param center: center of a ball outside which the surface has no crossings
        :param radius: radius of that ball, None for an unbounded search
        :param closed: whether the surface bounds a region
        :param far_plane: (point, normal) of a hyperplane the surface coincides with
            outside the ball
        :param label: the scene name
        """
        scale = radius if radius is not None else feature_scale
        super().__init__(dim=dim, scale=scale, closed=closed)
        if not feature_scale > 0.0:
            raise SceneError('feature scale must be positive', 'scene.feature_scale')
        self.func = func
        self.grad = grad
        self.hess = hess
        self.feature_scale = feature_scale
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.radius = radius
        self.far_plane = None if far_plane is None else PlaneScene(*far_plane)
        self.label = label

    def name(self) -> str:  # noqa: D102
        return self.label

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        if self.radius is None or self.far_plane is not None:
            return None
        return self.center, self.radius

    def level(self, x: Array) -> Array:  # noqa: D102
        return self.func(x)

    def gradient(self, x: Array) -> Array:  # noqa: D102
        return self.grad(x)

    def hessian(self, x: Array) -> Array:  # noqa: D102
        if self.hess is None:
            raise SceneError(f"scene '{self.label}' declares no Hessian", 'scene')
        return self.hess(x)

    def ray_hits(  # noqa: D102
        self,
        origins: ArrayLike,
        dirs: ArrayLike,
        t_max: ArrayLike,
        start_on_surface: bool = False,
    ) -> RayHits:
        o, d, tm = broadcast_rays(origins, dirs, t_max, self.dim)
        m = len(d)
        ids: List[NDArray[np.int64]] = []
        roots: List[Array] = []
        tangent = np.zeros(m, dtype=bool)
        for lo in range(0, m, RAY_CHUNK):
            hi = min(lo + RAY_CHUNK, m)
            chunk_ids, chunk_roots, chunk_tangent = self._march(
                o[lo:hi], d[lo:hi], tm[lo:hi], start_on_surface)
            ids.append(chunk_ids + lo)
            roots.append(chunk_roots)
            tangent[lo:hi] = chunk_tangent
        if self.far_plane is not None and self.radius is not None:
            plane_hits = self.far_plane.ray_hits(o, d, tm)
            t_plane = plane_hits.t[:, 0] if plane_hits.t.shape[1] else np.full(m, np.nan)
            p = o + np.nan_to_num(t_plane)[:, None] * d
            outside = np.linalg.norm(p - self.center, axis=1) > self.radius
            plane_ids = np.nonzero(outside & ~np.isnan(t_plane))[0]
            ids.append(plane_ids)
            roots.append(t_plane[plane_ids])
        return pack_hits(
            m,
            np.concatenate(ids).astype(np.int64),
            np.concatenate(roots),
            tangent,
        )

    def _march(
        self,
        o: Array,
        d: Array,
        tm: Array,
        start_on_surface: bool,
    ) -> Tuple[NDArray[np.int64], Array, NDArray[np.bool_]]:
        m = len(d)
        if self.radius is not None:
            # The far plane takes over exactly at the ball
            margin = 1.0 if self.far_plane is not None else MARCH_BALL_MARGIN
            t_lo, t_hi = ball_interval(o, d, self.center, margin * self.radius)
            t_lo = np.maximum(np.nan_to_num(t_lo, nan=0.0), 0.0)
            t_hi = np.minimum(np.nan_to_num(t_hi, nan=-1.0), tm)
        else:
            t_lo = np.zeros(m)
            t_hi = tm.copy()
        active = t_hi > t_lo
        span = np.where(active, t_hi - t_lo, 0.0)
        max_step = MARCH_STEP_FRACTION * self.feature_scale
        samples = max(MIN_MARCH_SAMPLES, int(math.ceil(float(span.max(initial=0.0)) / max_step)))
        ts = t_lo[:, None] + (span / samples)[:, None] * np.arange(samples + 1)
        pts = o[:, None, :] + ts[..., None] * d[:, None, :]
        signs = self.func(pts.reshape(-1, self.dim)).reshape(m, samples + 1) >= 0.0
        if start_on_surface:
            # Just after leaving the surface f has the sign of ∇f·d
            at_base = t_lo == 0.0
            slope = np.einsum('ij,ij->i', self.grad(o), d)
            signs[at_base, 0] = slope[at_base] >= 0.0
        change = (signs[:, 1:] != signs[:, :-1]) & active[:, None]
        ray_ids, k = np.nonzero(change)
        ta = ts[ray_ids, k]
        tb = ts[ray_ids, k + 1]
        sa = signs[ray_ids, k]
        ro = o[ray_ids]
        rd = d[ray_ids]
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (ta + tb)
            same = (self.func(ro + mid[:, None] * rd) >= 0.0) == sa
            ta = np.where(same, mid, ta)
            tb = np.where(same, tb, mid)
        t = 0.5 * (ta + tb)
        p = ro + t[:, None] * rd
        g = self.grad(p)
        slope = np.einsum('ij,ij->i', g, rd)
        with np.errstate(divide='ignore', invalid='ignore'):
            newton = t - self.func(p) / slope
        polish = np.isfinite(newton) & (newton > ta) & (newton < tb)
        t = np.where(polish, newton, t)
        grazing = np.abs(slope) < TANGENCY_TOLERANCE * np.linalg.norm(g, axis=1)
        tangent = np.zeros(m, dtype=bool)
        tangent[ray_ids[grazing]] = True
        return ray_ids.astype(np.int64), t, tangent


class QuadraticGraphScene(LevelSetScene):
    """Graph x_n = ½ Σ c_i x_i², with upward normal and closed-form crossings."""

    def __init__(self, curvatures: Sequence[float], label: str = 'graph') -> None:
        """Create a QuadraticGraphScene from the principal coefficients c_i."""
        c = np.asarray(curvatures, dtype=float)
        peak = float(np.max(np.abs(c))) if len(c) else 0.0
        super().__init__(dim=len(c) + 1, scale=1.0 / peak if peak > 0.0 else 1.0, closed=False)
        self.coefficients = c
        self.label = label

    def name(self) -> str:  # noqa: D102
        return self.label

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        return None

    def level(self, x: Array) -> Array:  # noqa: D102
        return np.asarray(x[:, -1] - 0.5 * (x[:, :-1] ** 2) @ self.coefficients)

    def gradient(self, x: Array) -> Array:  # noqa: D102
        g = np.empty_like(x)
        g[:, :-1] = -self.coefficients * x[:, :-1]
        g[:, -1] = 1.0
        return g

    def hessian(self, x: Array) -> Array:  # noqa: D102
        h = np.zeros((len(x), self.dim, self.dim))
        idx = np.arange(self.dim - 1)
        h[:, idx, idx] = -self.coefficients
        return h

    def ray_hits(  # noqa: D102
        self,
        origins: ArrayLike,
        dirs: ArrayLike,
        t_max: ArrayLike,
        start_on_surface: bool = False,
    ) -> RayHits:
        o, d, tm = broadcast_rays(origins, dirs, t_max, self.dim)
        c = self.coefficients
        qa = -0.5 * (d[:, :-1] ** 2) @ c
        qb = d[:, -1] - (o[:, :-1] * d[:, :-1]) @ c
        qc = np.zeros(len(d)) if start_on_surface else self.level(o)
        roots = np.full((len(d), 2), np.nan)
        linear = np.abs(qa) <= 1e-14 * np.maximum(np.abs(qb), 1e-300)
        with np.errstate(divide='ignore', invalid='ignore'):
            roots[linear, 0] = -qc[linear] / qb[linear]
            disc = qb * qb - 4.0 * qa * qc
            root = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
            # Stable quadratic roots
            q = -0.5 * (qb + np.copysign(root, qb))
            quad = ~linear & (disc >= 0.0)
            roots[quad, 0] = (q / qa)[quad]
            roots[quad, 1] = (qc / q)[quad]
        roots[~np.isfinite(roots)] = np.nan
        if start_on_surface:
            roots[np.abs(roots) <= self.tolerance * 1e-3] = np.nan
        p = o[:, None, :] + np.nan_to_num(roots)[..., None] * d[:, None, :]
        g = self.gradient(p.reshape(-1, self.dim)).reshape(p.shape)
        slope = np.abs(np.einsum('ijk,ik->ij', g, d))
        grazing = (slope < TANGENCY_TOLERANCE * np.linalg.norm(g, axis=2)) & ~np.isnan(roots)
        tangent = grazing.any(axis=1)
        keep = (roots > 0.0) & (roots <= tm[:, None]) & ~grazing
        ray_ids, slot = np.nonzero(keep)
        return pack_hits(len(d), ray_ids, roots[ray_ids, slot], tangent)


def torus_scene(
    major: float,
    minor: float,
    center: Optional[ArrayLike] = None,
) -> ImplicitScene:
    """
    Build the torus (√(x²+y²) − R)² + z² = r² around the z axis, outward normal.

    :param major: the distance R from the axis to the tube center
    :param minor: the tube radius r, smaller than R
    :param center: the torus center
    """
    if not 0.0 < minor < major:
        raise SceneError(f'torus needs 0 < r < R, got R={major}, r={minor}', 'scene')
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)

    def split(x: Array) -> Tuple[Array, Array]:
        p = x - c
        q = np.maximum(np.hypot(p[:, 0], p[:, 1]), 1e-300)
        return p, q

    def func(x: Array) -> Array:
        p, q = split(x)
        return np.asarray((q - major) ** 2 + p[:, 2] ** 2 - minor ** 2)

    def grad(x: Array) -> Array:
        p, q = split(x)
        g = np.empty_like(p)
        g[:, 0] = 2.0 * (q - major) * p[:, 0] / q
        g[:, 1] = 2.0 * (q - major) * p[:, 1] / q
        g[:, 2] = 2.0 * p[:, 2]
        return g

    def hess(x: Array) -> Array:
        p, q = split(x)
        h = np.zeros((len(p), 3, 3))
        radial = 1.0 - major / q
        for i in range(2):
            for j in range(2):
                h[:, i, j] = 2.0 * major * p[:, i] * p[:, j] / q ** 3
            h[:, i, i] += 2.0 * radial
        h[:, 2, 2] = 2.0
        return h

    return ImplicitScene(
        dim=3,
        func=func,
        grad=grad,
        hess=hess,
        feature_scale=minor,
        center=c,
        radius=major + minor,
        label='torus',
    )


def implicit_sphere_scene(radius: float, dim: int = 3) -> ImplicitScene:
    """Build the sphere |x|² − ρ² = 0 as a generic level set."""
    if not radius > 0.0:
        raise SceneError(f'sphere radius must be positive, got {radius}', 'scene.r')

    def func(x: Array) -> Array:
        return np.asarray(np.einsum('ij,ij->i', x, x) - radius ** 2)

    def grad(x: Array) -> Array:
        return 2.0 * x

    def hess(x: Array) -> Array:
        return np.broadcast_to(2.0 * np.eye(dim), (len(x), dim, dim)).copy()

    return ImplicitScene(
        dim=dim,
        func=func,
        grad=grad,
        hess=hess,
        feature_scale=radius,
        radius=radius,
        label='implicit-sphere',
    )


def bump_scene(height: float, width: float) -> ImplicitScene:
    """
    Build the graph z = a·exp(−(x²+y²)/b²) with upward normal.

    Outside a ball of radius 7b the graph is the plane z = 0 to double precision.
    """
    if not width > 0.0:
        raise SceneError(f'bump width must be positive, got {width}', 'scene.b')

    def bump(x: Array) -> Array:
        return np.asarray(height * np.exp(-(x[:, 0] ** 2 + x[:, 1] ** 2) / width ** 2))

    def func(x: Array) -> Array:
        return np.asarray(x[:, 2] - bump(x))

    def grad(x: Array) -> Array:
        g = np.empty_like(x)
        factor = 2.0 * bump(x) / width ** 2
        g[:, 0] = factor * x[:, 0]
        g[:, 1] = factor * x[:, 1]
        g[:, 2] = 1.0
        return g

    def hess(x: Array) -> Array:
        b = bump(x)
        h = np.zeros((len(x), 3, 3))
        w2 = width ** 2
        for i in range(2):
            for j in range(2):
                h[:, i, j] = -4.0 * b * x[:, i] * x[:, j] / w2 ** 2
            h[:, i, i] += 2.0 * b / w2
        return h

    curvature = 2.0 * abs(height) / width ** 2
    return ImplicitScene(
        dim=3,
        func=func,
        grad=grad,
        hess=hess,
        feature_scale=min(width, 1.0 / curvature) if curvature > 0.0 else width,
        center=np.zeros(3),
        radius=7.0 * width + abs(height),
        closed=False,
        far_plane=(np.zeros(3), np.array([0.0, 0.0, 1.0])),
        label='bump',
    )


def crossings(
    scene: SurfaceScene,
    z: ArrayLike,
    d: ArrayLike,
    t_max: float,
) -> CrossingList:
    """
    Find all transversal crossings of the ray z + t·d, 0 < t <= t_max, with the surface.

    :param scene: the surface
    :param z: the base point; if it lies on the surface its own crossing is excluded
    :param d: the unit direction
    :param t_max: the ray length
    :return: the sorted crossings
    """
    base = np.asarray(z, dtype=float)
    direction = np.asarray(d, dtype=float)
    if abs(float(np.linalg.norm(direction)) - 1.0) > 1e-12:
        raise SceneError('ray direction must be a unit vector')
    if not t_max > 0.0:
        raise SceneError('t_max must be positive')
    hits = scene.ray_hits(base, direction[None, :], t_max, scene.on_surface(base))
    if hits.tangent[0]:
        raise TangencyDetected(f'ray from {list(base)} along {list(direction)} is tangent')
    t = hits.t[0, :hits.count[0]].copy()
    return CrossingList(z=base, d=direction, t=t, tangential=False)


def segment_parity(
    scene: SurfaceScene,
    x: ArrayLike,
    y: ArrayLike,
) -> int:
    """
    Get the parity of the number of crossings of the open segment (x, y).

    :return: 1 if the segment crosses an odd number of times, 0 otherwise
    """
    return int(segment_parities(scene, np.atleast_2d(x), np.atleast_2d(y))[0])


def segment_parities(
    scene: SurfaceScene,
    xs: Array,
    ys: Array,
) -> NDArray[np.int64]:
    """
    Get crossing parities for a batch of segments.

    :param xs: first endpoints (m, n)
    :param ys: second endpoints (m, n)
    :return: parity per segment
    """
    delta = ys - xs
    length = np.linalg.norm(delta, axis=1)
    if np.any(length == 0.0):
        raise SceneError('segment endpoints must differ')
    for p in np.concatenate((xs, ys)):
        if scene.on_surface(p):
            raise EndpointOnSurface(f'segment endpoint {list(p)} lies on {scene.name()}')
    hits = scene.ray_hits(xs, delta / length[:, None], length)
    if hits.tangent.any():
        raise TangencyDetected('segment touches the surface tangentially')
    return hits.parity()


def classify_points(
    scene: SurfaceScene,
    z: ArrayLike,
    n_z: ArrayLike,
    ys: ArrayLike,
) -> NDArray[np.int64]:
    """
    Evaluate the point-pair classifier χ̂(z, y) for a batch of points y.

    χ̂ is +1 on the side that is "inside" as seen from z: an even number of crossings on
    the open segment with (z − y)·n(z) > 0, or an odd number with (z − y)·n(z) < 0.

    :param scene: the surface
    :param z: a point on the surface
    :param n_z: the orientation normal at z
    :param ys: points off the surface (m, n)
    :return: values in {-1, 0, +1}
    """
    base = np.asarray(z, dtype=float)
    normal = np.asarray(n_z, dtype=float)
    pts = np.atleast_2d(np.asarray(ys, dtype=float))
    delta = pts - base
    length = np.linalg.norm(delta, axis=1)
    side = np.sign(-(delta @ normal))
    hits = scene.ray_hits(base, delta / length[:, None], length, start_on_surface=True)
    if hits.tangent.any():
        raise TangencyDetected(f'a segment from {list(base)} is tangent to {scene.name()}')
    # χ̂ = side when the parity is even and −side when odd
    return (side * (1 - 2 * hits.parity())).astype(np.int64)


def classify(
    scene: SurfaceScene,
    z: ArrayLike,
    n_z: ArrayLike,
    y: ArrayLike,
) -> int:
    """
    Evaluate χ̂(z, y) for one point.

    :return: +1, -1, or 0 when y lies in the tangent plane at z
    """
    return int(classify_points(scene, z, n_z, np.atleast_2d(y))[0])


def tangent_frame(scene: SurfaceScene, z: ArrayLike) -> TangentFrame:
    """
    Build a deterministic orthonormal frame of the tangent space at z.

    The tangent vectors come from Gram-Schmidt on the coordinate axes, skipping the axis
    most aligned with the normal.
    """
    base = np.asarray(z, dtype=float)
    if not scene.on_surface(base):
        raise PointNotOnSurface(f'point {list(base)} is not on {scene.name()}')
    normal = np.asarray(scene.normal(base), dtype=float)
    return frame_from_normal(base, normal)


def frame_from_normal(z: Array, normal: Array) -> TangentFrame:
    """Build the deterministic tangent frame for a given unit normal."""
    dim = len(normal)
    skip = int(np.argmax(np.abs(normal)))
    basis: List[Array] = [normal]
    for axis in range(dim):
        if axis == skip:
            continue
        v = np.zeros(dim)
        v[axis] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return TangentFrame(z=z, tangents=np.array(basis[1:]), normal=normal)


def project_to_tangent(
    z: ArrayLike,
    frame: TangentFrame,
    y: ArrayLike,
) -> Tuple[Array, Array, float, float]:
    """
    Project a point onto the tangent plane at z.

    :return: (y′, ê, ρ, h) with y′ = z + P(y − z), ê = (y′ − z)/ρ, ρ = |y′ − z| and
        h = (y − z)·n(z)
    """
    base = np.asarray(z, dtype=float)
    delta = np.asarray(y, dtype=float) - base
    h = float(delta @ frame.normal)
    planar = delta - h * frame.normal
    rho = float(np.linalg.norm(planar))
    if rho <= DEGENERATE_PROJECTION_TOLERANCE * max(1.0, float(np.linalg.norm(delta))):
        raise DegenerateProjection(f'point {list(np.ravel(y))} lies on the normal line at z')
    return base + planar, planar / rho, rho, h


def random_unit_vectors(rng: np.random.Generator, m: int, dim: int) -> Array:
    """Draw m isotropic unit vectors in R^dim."""
    v = rng.standard_normal((m, dim))
    return np.asarray(v / np.linalg.norm(v, axis=1, keepdims=True))


def as_points(values: ArrayLike, dim: int) -> Array:
    """Convert a point or list of points to an (m, dim) array."""
    pts = np.atleast_2d(np.asarray(values, dtype=float))
    if pts.shape[1] != dim:
        raise SceneError(f'points have dimension {pts.shape[1]}, expected {dim}', 'points')
    return pts
