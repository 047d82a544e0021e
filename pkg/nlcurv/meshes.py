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

"""Triangle mesh surfaces: generators, OFF/OBJ loading, ray casting and curved patches."""

import math
from typing import Dict
from typing import List
from typing import Optional
from typing import Set
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray

from .errors import PointNotOnSurface
from .errors import SceneError
from .logger import logger
from .surface import Array
from .surface import broadcast_rays
from .surface import frame_from_normal
from .surface import pack_hits
from .surface import RayHits
from .surface import SurfaceScene
from .surface import TANGENCY_TOLERANCE


IntArray = NDArray[np.int64]
Multi = Tuple[int, int, int]

# Rays times triangles per Möller-Trumbore batch
MT_BATCH = 1 << 21
BARYCENTRIC_SLACK = 1e-12
# Fixed generic direction for inside tests, off every symmetry axis of the generators
PROBE_DIRECTION = np.array([0.5786502691896258, 0.5744502691896257, 0.5780502691896258])
PROBE_DIRECTION /= np.linalg.norm(PROBE_DIRECTION)

CUBIC_INDICES: List[Multi] = [
    (i, j, 3 - i - j) for i in range(3, -1, -1) for j in range(3 - i, -1, -1)
]
QUADRATIC_INDICES: List[Multi] = [
    (i, j, 2 - i - j) for i in range(2, -1, -1) for j in range(2 - i, -1, -1)
]


def directed_edges(faces: IntArray) -> IntArray:
    """Get the three directed edges (a, b), (b, c), (c, a) of every face, stacked."""
    return np.asarray(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2))


def check_orientation(faces: IntArray) -> bool:
    """
    Check that triangles are consistently oriented.

    Each directed edge may appear once; an interior edge must appear once in each direction.

    :return: whether the mesh is closed (every edge interior)
    """
    edges = directed_edges(faces)
    seen: Set[Tuple[int, int]] = set()
    for a, b in edges.tolist():
        if (a, b) in seen:
            raise SceneError(
                f'edge ({a}, {b}) is used twice in the same direction; '
                'triangles are not consistently oriented', 'scene.mesh')
        seen.add((a, b))
    return all((b, a) in seen for a, b in seen)


def face_normals(vertices: Array, faces: IntArray) -> Array:
    """Get area-weighted (unnormalized) face normals."""
    p = vertices[faces]
    return np.asarray(0.5 * np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]))


def vertex_normals(vertices: Array, faces: IntArray) -> Array:
    """Get vertex normals as normalized sums of area-weighted face normals."""
    fn = face_normals(vertices, faces)
    vn = np.zeros_like(vertices)
    for corner in range(3):
        np.add.at(vn, faces[:, corner], fn)
    norms = np.linalg.norm(vn, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise SceneError('mesh has a vertex with no incident area', 'scene.mesh')
    return np.asarray(vn / norms)


def orient_faces(vertices: Array, faces: IntArray, outward: Array) -> IntArray:
    """Flip faces whose geometric normal disagrees with a reference direction per face."""
    fn = face_normals(vertices, faces)
    flip = np.einsum('ij,ij->i', fn, outward) < 0.0
    fixed = faces.copy()
    fixed[flip] = fixed[flip][:, [0, 2, 1]]
    return fixed


def dunavant_rule() -> Tuple[Array, Array]:
    """
    Get the 6-point degree-4 symmetric rule on a triangle.

    :return: barycentric points (6, 3) and weights summing to one
    """
    a = 0.445948490915965
    b = 0.091576213509771
    wa = 0.223381589678011
    wb = 0.109951743655322
    pts = np.array([
        [a, a, 1.0 - 2.0 * a],
        [a, 1.0 - 2.0 * a, a],
        [1.0 - 2.0 * a, a, a],
        [b, b, 1.0 - 2.0 * b],
        [b, 1.0 - 2.0 * b, b],
        [1.0 - 2.0 * b, b, b],
    ])
    return pts, np.array([wa, wa, wa, wb, wb, wb])


def pn_control_points(corners: Array, normals: Array) -> Dict[Multi, Array]:
    """
    Build cubic Bézier control nets of curved (PN) triangles.

    The patch interpolates the corners and is tangent there to the planes normal to the
    vertex normals, which recovers the curvature lost by flat facets.

    :param corners: corner positions (F, 3, 3)
    :param normals: corner unit normals (F, 3, 3)
    :return: control points keyed by Bézier multi-index
    """
    p = [corners[:, i] for i in range(3)]
    nv = [normals[:, i] for i in range(3)]

    def edge_point(i: int, j: int) -> Array:
        w = np.einsum('ij,ij->i', p[j] - p[i], nv[i])
        return np.asarray((2.0 * p[i] + p[j] - w[:, None] * nv[i]) / 3.0)

    ctrl: Dict[Multi, Array] = {
        (3, 0, 0): p[0],
        (0, 3, 0): p[1],
        (0, 0, 3): p[2],
        (2, 1, 0): edge_point(0, 1),
        (1, 2, 0): edge_point(1, 0),
        (0, 2, 1): edge_point(1, 2),
        (0, 1, 2): edge_point(2, 1),
        (1, 0, 2): edge_point(2, 0),
        (2, 0, 1): edge_point(0, 2),
    }
    edge_mean = sum(ctrl[k] for k in ctrl if 3 not in k) / 6.0
    centroid = (p[0] + p[1] + p[2]) / 3.0
    ctrl[(1, 1, 1)] = edge_mean + 0.5 * (edge_mean - centroid)
    return ctrl


def _bernstein(index: Multi, bary: Array) -> Array:
    i, j, k = index
    coeff = math.factorial(i + j + k) / (
        math.factorial(i) * math.factorial(j) * math.factorial(k))
    basis = coeff * bary[..., 0] ** i * bary[..., 1] ** j * bary[..., 2] ** k
    # Shared points broadcast over faces
    return np.asarray(np.atleast_2d(basis)[..., None])


def pn_evaluate(ctrl: Dict[Multi, Array], bary: Array) -> Tuple[Array, Array]:
    """
    Evaluate curved triangles at barycentric points.

    :param ctrl: control nets from pn_control_points, each (F, 3)
    :param bary: barycentric points shared by all faces (Q, 3) or per face (F, Q, 3)
    :return: positions (F, Q, 3) and oriented area vectors ∂s b × ∂t b (F, Q, 3)
    """
    pos = sum(_bernstein(k, bary) * ctrl[k][:, None, :] for k in CUBIC_INDICES)
    partial = []
    for axis in range(3):
        shift = [0, 0, 0]
        shift[axis] = 1
        partial.append(3.0 * sum(
            _bernstein(k, bary)
            * ctrl[(k[0] + shift[0], k[1] + shift[1], k[2] + shift[2])][:, None, :]
            for k in QUADRATIC_INDICES
        ))
    # (s, t) = (second, third) barycentric coordinate
    ds = partial[1] - partial[0]
    dt = partial[2] - partial[0]
    return np.asarray(pos), np.asarray(np.cross(ds, dt))


class MeshScene(SurfaceScene):
    """Consistently oriented triangle mesh in R^3 with per-vertex normals."""

    def __init__(
        self,
        vertices: ArrayLike,
        faces: ArrayLike,
        normals: Optional[ArrayLike] = None,
        label: str = 'mesh',
    ) -> None:
        """
        Create a MeshScene.

        :param vertices: vertex positions (V, 3)
        :param faces: counter-clockwise (outward) triangles (F, 3)
        :param normals: unit vertex normals (V, 3), area-weighted face normals if omitted
        :param label: the scene name
        """
        v = np.asarray(vertices, dtype=float)
        f = np.asarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise SceneError('mesh vertices must be an (V, 3) array', 'scene.mesh')
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise SceneError('mesh faces must be a non-empty (F, 3) array', 'scene.mesh')
        if f.min() < 0 or f.max() >= len(v):
            raise SceneError('mesh face index out of range', 'scene.mesh')
        closed = check_orientation(f)
        center = v.mean(axis=0)
        radius = float(np.linalg.norm(v - center, axis=1).max())
        super().__init__(dim=3, scale=radius, closed=closed)
        self.vertices = v
        self.faces = f
        if normals is None:
            self.normals = vertex_normals(v, f)
        else:
            n = np.asarray(normals, dtype=float)
            if n.shape != v.shape:
                raise SceneError('mesh normals must match the vertices', 'scene.mesh')
            self.normals = n / np.linalg.norm(n, axis=1, keepdims=True)
        self.center = center
        self.radius = radius
        self.label = label
        corners = v[f]
        self.__edge1 = corners[:, 1] - corners[:, 0]
        self.__edge2 = corners[:, 2] - corners[:, 0]
        self.__origin = corners[:, 0]
        self.__neighbors: Optional[List[Set[int]]] = None
        logger.verbose_print(
            f'mesh {label}: {len(v)} vertices, {len(f)} faces, '
            f'{"closed" if closed else "with boundary"}')

    def name(self) -> str:  # noqa: D102
        return self.label

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        return self.center, self.radius

    def edge_length(self) -> float:
        """Get the mean edge length."""
        edges = directed_edges(self.faces)
        return float(np.linalg.norm(
            self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]], axis=1).mean())

    def neighbors(self) -> List[Set[int]]:
        """Get the vertex adjacency lists."""
        if self.__neighbors is None:
            adjacency: List[Set[int]] = [set() for _ in range(len(self.vertices))]
            for a, b in directed_edges(self.faces).tolist():
                adjacency[a].add(b)
                adjacency[b].add(a)
            self.__neighbors = adjacency
        return self.__neighbors

    def k_ring(self, vertex: int, rings: int) -> Set[int]:
        """Get the vertices within a number of edge hops of a vertex."""
        adjacency = self.neighbors()
        ring = {vertex}
        frontier = {vertex}
        for _ in range(rings):
            frontier = {b for a in frontier for b in adjacency[a]} - ring
            ring |= frontier
        return ring

    def nearest_vertex(self, x: ArrayLike) -> int:
        """Get the index of the vertex closest to a point."""
        return int(np.argmin(np.linalg.norm(self.vertices - np.asarray(x, dtype=float), axis=1)))

    def locate(self, x: ArrayLike) -> Tuple[int, Array]:
        """
        Find the face containing a point of the mesh.

        :return: the face index and the barycentric coordinates of the point
        :raises PointNotOnSurface: if no face contains the point
        """
        p = np.asarray(x, dtype=float)
        rel = p - self.__origin
        n = np.cross(self.__edge1, self.__edge2)
        area2 = np.einsum('ij,ij->i', n, n)
        dist = np.abs(np.einsum('ij,ij->i', rel, n)) / np.sqrt(area2)
        # Barycentric coordinates of the projection onto each face plane
        v = np.einsum('ij,ij->i', np.cross(rel, self.__edge2), n) / area2
        w = np.einsum('ij,ij->i', np.cross(self.__edge1, rel), n) / area2
        u = 1.0 - v - w
        slack = 1e-9
        inside = (u >= -slack) & (v >= -slack) & (w >= -slack) & (dist <= self.tolerance)
        hits = np.nonzero(inside)[0]
        if not len(hits):
            raise PointNotOnSurface(f'point {list(p)} is not on mesh {self.label}')
        face = int(hits[np.argmin(dist[hits])])
        return face, np.array([u[face], v[face], w[face]])

    def normal(self, z: ArrayLike) -> Array:  # noqa: D102
        pts = np.asarray(z, dtype=float)
        out = []
        for p in np.atleast_2d(pts):
            face, bary = self.locate(p)
            nv = bary @ self.normals[self.faces[face]]
            out.append(nv / np.linalg.norm(nv))
        return np.asarray(np.array(out).reshape(pts.shape))

    def on_surface(self, x: ArrayLike) -> bool:  # noqa: D102
        try:
            self.locate(x)
        except PointNotOnSurface:
            return False
        return True

    def contains(self, x: ArrayLike) -> NDArray[np.bool_]:  # noqa: D102
        if not self.closed:
            raise SceneError(f'mesh {self.label} has a boundary and encloses no region')
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        reach = np.linalg.norm(pts - self.center, axis=1) + 2.0 * self.radius
        hits = self.ray_hits(pts, np.broadcast_to(PROBE_DIRECTION, pts.shape), reach)
        return np.asarray(hits.parity() == 1)

    def project(self, x: ArrayLike) -> Array:  # noqa: D102
        p = np.asarray(x, dtype=float)
        if self.on_surface(p):
            return p
        # Off-mesh inputs snap to the closest vertex
        return np.asarray(self.vertices[self.nearest_vertex(p)])

    def ray_hits(  # noqa: D102
        self,
        origins: ArrayLike,
        dirs: ArrayLike,
        t_max: ArrayLike,
        start_on_surface: bool = False,
    ) -> RayHits:
        o, d, tm = broadcast_rays(origins, dirs, t_max, 3)
        m = len(d)
        batch = max(1, MT_BATCH // len(self.faces))
        ids: List[IntArray] = []
        roots: List[Array] = []
        tangent = np.zeros(m, dtype=bool)
        t_min = self.tolerance if start_on_surface else 0.0
        for lo in range(0, m, batch):
            hi = min(lo + batch, m)
            ray_ids, t, coplanar = self._moller_trumbore(o[lo:hi], d[lo:hi])
            tangent[lo:hi] |= coplanar
            keep = (t > t_min) & (t <= tm[lo:hi][ray_ids])
            ray_ids = ray_ids[keep]
            t = t[keep]
            # Two faces at the same t: the ray passes through an edge or a vertex
            order = np.lexsort((t, ray_ids))
            same = (np.diff(ray_ids[order]) == 0) & (
                np.diff(t[order]) <= BARYCENTRIC_SLACK * self.scale)
            tangent[lo + ray_ids[order][1:][same]] = True
            ids.append(ray_ids + lo)
            roots.append(t)
        return pack_hits(m, np.concatenate(ids).astype(np.int64), np.concatenate(roots), tangent)

    def _moller_trumbore(
        self,
        o: Array,
        d: Array,
    ) -> Tuple[IntArray, Array, NDArray[np.bool_]]:
        e1 = self.__edge1[None, :, :]
        e2 = self.__edge2[None, :, :]
        pvec = np.cross(d[:, None, :], e2)
        det = np.einsum('rfk,rfk->rf', np.broadcast_to(e1, pvec.shape), pvec)
        area_normal = np.cross(self.__edge1, self.__edge2)
        size = np.linalg.norm(area_normal, axis=1)[None, :]
        parallel = np.abs(det) < TANGENCY_TOLERANCE * size
        tvec = o[:, None, :] - self.__origin[None, :, :]
        # A ray parallel to a face is tangential only if it runs in the face plane
        height = np.abs(np.einsum('rfk,fk->rf', tvec, area_normal)) / size
        coplanar = np.any(parallel & (height <= self.tolerance), axis=1)
        safe = np.where(parallel, 1.0, det)
        u = np.einsum('rfk,rfk->rf', tvec, pvec) / safe
        qvec = np.cross(tvec, e1)
        v = np.einsum('rk,rfk->rf', d, qvec) / safe
        t = np.einsum('rfk,rfk->rf', np.broadcast_to(e2, qvec.shape), qvec) / safe
        slack = BARYCENTRIC_SLACK
        hit = (u >= -slack) & (v >= -slack) & (u + v <= 1.0 + slack) & ~parallel
        ray_ids, face_ids = np.nonzero(hit)
        return ray_ids.astype(np.int64), np.asarray(t[ray_ids, face_ids]), coplanar

    def outward_is_normal(self) -> bool:
        """Check that vertex normals point out of a closed mesh."""
        top = int(np.argmax(self.vertices[:, 2]))
        return bool(self.normals[top, 2] > 0.0)

    def fit_shape_operator(self, vertex: int, rings: int = 2) -> Tuple[Array, Array]:
        """
        Fit the classical curvature tensor at a vertex from the normals of its k-ring.

        The surface is read as a graph over the tangent plane, where the tangent components
        of n(y) divided by its normal component equal −L·x for the osculating quadric.

        :return: the tangent frame vectors (2, 3) and L (2, 2) in that frame
        """
        z = self.vertices[vertex]
        frame = frame_from_normal(z, self.normals[vertex])
        ring = sorted(self.k_ring(vertex, rings) - {vertex})
        if len(ring) < 3:
            raise SceneError(f'vertex {vertex} has too few neighbors for a curvature fit')
        x = frame.tangent_coordinates(self.vertices[ring] - z)
        ny = self.normals[ring]
        slope = frame.tangent_coordinates(ny) / (ny @ frame.normal)[:, None]
        # Unknowns (a, b, c) of the symmetric L = [[a, b], [b, c]]
        rows = np.zeros((2 * len(ring), 3))
        rows[0::2, 0] = x[:, 0]
        rows[0::2, 1] = x[:, 1]
        rows[1::2, 1] = x[:, 0]
        rows[1::2, 2] = x[:, 1]
        rhs = -slope.reshape(-1)
        coeffs = np.linalg.lstsq(rows, rhs, rcond=None)[0]
        shape = np.array([[coeffs[0], coeffs[1]], [coeffs[1], coeffs[2]]])
        return frame.tangents, shape


def icosphere(
    level: int,
    radius: float = 1.0,
    center: Optional[ArrayLike] = None,
) -> MeshScene:
    """
    Build a subdivided icosahedron on a sphere with exact radial normals.

    Level k has 20·4^k faces.
    """
    if level < 0:
        raise SceneError(f'icosphere level must be non-negative, got {level}', 'scene.level')
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    g = 0.5 * (1.0 + math.sqrt(5.0))
    verts = np.array([
        [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
        [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
        [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    for _ in range(level):
        edges = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        unique, inverse = np.unique(edges, axis=0, return_inverse=True)
        mids = verts[unique[:, 0]] + verts[unique[:, 1]]
        mids /= np.linalg.norm(mids, axis=1, keepdims=True)
        mid = len(verts) + np.asarray(inverse).reshape(-1, 3)
        a, b, cc = faces.T
        ab, bc, ca = mid.T
        faces = np.concatenate([
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, cc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ])
        verts = np.concatenate([verts, mids])
    faces = orient_faces(verts, faces, verts[faces].mean(axis=1))
    return MeshScene(c + radius * verts, faces, normals=verts, label='icosphere')


def torus_mesh(
    major: float,
    minor: float,
    nu: int,
    nv: int,
    center: Optional[ArrayLike] = None,
) -> MeshScene:
    """
    Build a triangulated torus around the z axis with exact normals.

    :param major: the distance R from the axis to the tube center
    :param minor: the tube radius r
    :param nu: segments around the axis
    :param nv: segments around the tube
    """
    if not 0.0 < minor < major:
        raise SceneError(f'torus needs 0 < r < R, got R={major}, r={minor}', 'scene')
    if nu < 3 or nv < 3:
        raise SceneError('torus mesh needs at least 3 segments each way', 'scene')
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    u, v = np.meshgrid(
        2.0 * np.pi * np.arange(nu) / nu, 2.0 * np.pi * np.arange(nv) / nv, indexing='ij')
    u = u.ravel()
    v = v.ravel()
    normals = np.stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)], axis=1)
    verts = c + np.stack([major * np.cos(u), major * np.sin(u), np.zeros_like(u)], axis=1)
    verts = verts + minor * normals
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing='ij')
    i = i.ravel()
    j = j.ravel()

    def idx(a: IntArray, b: IntArray) -> IntArray:
        return np.asarray((a % nu) * nv + (b % nv))

    quads = np.stack([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)], axis=1)
    faces = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]])
    faces = orient_faces(verts, faces, normals[faces].sum(axis=1))
    return MeshScene(verts, faces, normals=normals, label='torus-mesh')


def disk_mesh(radius: float, rings: int, segments: int) -> MeshScene:
    """
    Build a flat triangulated disk in the plane z = 0 with upward normals.

    Ring k holds segments·k vertices; consecutive rings are stitched by angle.
    """
    if rings < 1 or segments < 3:
        raise SceneError('disk mesh needs at least 1 ring and 3 segments', 'scene')
    pts = [np.zeros((1, 3))]
    starts = [0]
    counts = [1]
    for k in range(1, rings + 1):
        angles = 2.0 * np.pi * np.arange(segments * k) / (segments * k)
        pts.append(radius * k / rings * np.stack(
            [np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=1))
        starts.append(starts[-1] + counts[-1])
        counts.append(segments * k)
    faces: List[List[int]] = []
    for k in range(1, rings + 1):
        inner, n_in = starts[k - 1], counts[k - 1]
        outer, n_out = starts[k], counts[k]
        i = 0
        j = 0
        while i < n_in or j < n_out:
            a = inner + i % n_in
            b = outer + j % n_out
            if i >= n_in or (j < n_out and (j + 1) / n_out <= (i + 1) / n_in):
                faces.append([a, b, outer + (j + 1) % n_out])
                j += 1
            else:
                faces.append([a, b, inner + (i + 1) % n_in])
                i += 1
    face_array = np.array(faces, dtype=np.int64)
    # The center has no ring edges
    distinct = (
        (face_array[:, 0] != face_array[:, 1])
        & (face_array[:, 1] != face_array[:, 2])
        & (face_array[:, 0] != face_array[:, 2])
    )
    face_array = face_array[distinct]
    flat = np.concatenate(pts)
    up = np.tile(np.array([0.0, 0.0, 1.0]), (len(face_array), 1))
    face_array = orient_faces(flat, face_array, up)
    normals = np.tile(np.array([0.0, 0.0, 1.0]), (len(flat), 1))
    return MeshScene(flat, face_array, normals=normals, label='disk')


def _read_tokens(path: str) -> List[List[str]]:
    try:
        with open(path, 'r') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise SceneError(f'cannot read mesh file: {e}', 'scene.mesh')
    out = []
    for line in lines:
        line = line.split('#', 1)[0].strip()
        if line:
            out.append(line.split())
    return out


def load_off(path: str) -> MeshScene:
    """Load a triangle mesh from an OFF file."""
    rows = _read_tokens(path)
    if not rows or rows[0][0].upper() != 'OFF':
        raise SceneError(f"'{path}' is not an OFF file", 'scene.mesh')
    header = rows[0][1:] if len(rows[0]) > 1 else rows[1]
    body = rows[1:] if len(rows[0]) > 1 else rows[2:]
    try:
        n_verts, n_faces = int(header[0]), int(header[1])
        verts = np.array([[float(c) for c in r[:3]] for r in body[:n_verts]])
        faces = []
        for r in body[n_verts:n_verts + n_faces]:
            if int(r[0]) != 3:
                raise SceneError('only triangle faces are supported', 'scene.mesh')
            faces.append([int(c) for c in r[1:4]])
    except (IndexError, ValueError) as e:
        raise SceneError(f"malformed OFF file '{path}': {e}", 'scene.mesh')
    return MeshScene(verts, np.array(faces, dtype=np.int64), label=f'mesh:{path}')


def load_obj(path: str) -> MeshScene:
    """Load a triangle mesh from an OBJ file (v and f records only)."""
    verts = []
    faces = []
    try:
        for r in _read_tokens(path):
            if r[0] == 'v':
                verts.append([float(c) for c in r[1:4]])
            elif r[0] == 'f':
                if len(r) != 4:
                    raise SceneError('only triangle faces are supported', 'scene.mesh')
                faces.append([int(c.split('/')[0]) - 1 for c in r[1:4]])
    except ValueError as e:
        raise SceneError(f"malformed OBJ file '{path}': {e}", 'scene.mesh')
    return MeshScene(np.array(verts), np.array(faces, dtype=np.int64), label=f'mesh:{path}')


def load_mesh(path: str) -> MeshScene:
    """Load an OFF or OBJ mesh, chosen by file extension."""
    lower = path.lower()
    if lower.endswith('.off'):
        return load_off(path)
    if lower.endswith('.obj'):
        return load_obj(path)
    raise SceneError(f"unsupported mesh format '{path}' (expected .off or .obj)", 'scene.mesh')


def write_off(path: str, mesh: MeshScene) -> None:
    """Write a mesh to an OFF file."""
    with open(path, 'w') as f:
        f.write('OFF\n')
        f.write(f'{len(mesh.vertices)} {len(mesh.faces)} 0\n')
        for p in mesh.vertices:
            f.write(' '.join(repr(float(c)) for c in p) + '\n')
        for tri in mesh.faces:
            f.write('3 ' + ' '.join(str(int(i)) for i in tri) + '\n')
