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

"""
Monte-Carlo σ-perimeter and σ-area.

Pairs (x, y) are grouped by the line through them: random lines cut every region into
intervals, and the kernel |t−s|^{-1-σ} is integrated over interval pairs in closed form.
"""

from dataclasses import dataclass
import math
from typing import Callable
from typing import Optional
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray

from .errors import ConfigError
from .logger import logger
from .quadrature import QuadratureSpec
from .specfun import unit_sphere_measure
from .surface import Array
from .surface import ball_interval
from .surface import random_unit_vectors
from .surface import SurfaceScene
from .tasks import run_tasks


BATCHES = 32
LINE_REDRAWS = 10
OVERLAP_TOLERANCE = 1e-12

BoolArray = NDArray[np.bool_]


@dataclass(frozen=True)
class Steps:
    """
    Membership along lines: the state at t = −∞ flips at each sorted breakpoint.

    breaks is NaN-padded (m, K); tangent marks lines that touch a surface.
    """

    breaks: Array
    start: BoolArray
    tangent: BoolArray

    def segments(self) -> Tuple[Array, Array, BoolArray]:
        """
        Get the maximal intervals of the step function.

        :return: lower ends, upper ends and membership, each (m, K+1)
        """
        m, width = self.breaks.shape
        count = np.isfinite(self.breaks).sum(axis=1)
        lo = np.concatenate([np.full((m, 1), -np.inf), self.breaks], axis=1)
        hi = np.concatenate([self.breaks, np.full((m, 1), np.nan)], axis=1)
        hi[np.arange(m), count] = np.inf
        index = np.arange(width + 1)
        parity = self.start[:, None] ^ (index % 2 == 1)[None, :]
        inside = parity & (index[None, :] <= count[:, None])
        return lo, hi, inside


def _compress(breaks: Array, keep: BoolArray) -> Array:
    order = np.argsort(~keep, axis=1, kind='stable')
    packed = np.take_along_axis(breaks, order, axis=1)
    mask = np.take_along_axis(keep, order, axis=1)
    packed[~mask] = np.nan
    width = int(keep.sum(axis=1).max()) if len(keep) else 0
    return np.asarray(packed[:, :width])


def combine(a: Steps, b: Steps, op: Callable[[BoolArray, BoolArray], BoolArray]) -> Steps:
    """Apply a pointwise boolean operation to two step functions on the same lines."""
    m = len(a.start)
    merged = np.concatenate([a.breaks, b.breaks], axis=1)
    start = op(a.start, b.start)
    if merged.shape[1] == 0:
        return Steps(merged, start, a.tangent | b.tangent)
    source = np.concatenate([
        np.zeros(a.breaks.shape, dtype=bool), np.ones(b.breaks.shape, dtype=bool)], axis=1)
    order = np.argsort(merged, axis=1)
    merged = np.take_along_axis(merged, order, axis=1)
    source = np.take_along_axis(source, order, axis=1)
    valid = np.isfinite(merged)
    flips_a = np.cumsum(valid & ~source, axis=1) % 2 == 1
    flips_b = np.cumsum(valid & source, axis=1) % 2 == 1
    state = op(a.start[:, None] ^ flips_a, b.start[:, None] ^ flips_b)
    previous = np.concatenate([start.reshape(m, 1), state[:, :-1]], axis=1)
    keep = valid & (state != previous)
    return Steps(_compress(merged, keep), start, a.tangent | b.tangent)


class Region:
    """Subset of R^n that a line cuts into finitely many intervals."""

    def __init__(self, dim: int) -> None:
        """Create a Region."""
        self.dim = dim

    def steps(self, origins: Array, dirs: Array) -> Steps:
        """
        Get membership along the lines origins + t·dirs, t ∈ R.

        :param origins: points on the lines (m, n)
        :param dirs: unit directions (m, n)
        """
        raise NotImplementedError  # pragma: no cover

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:
        """Get a ball containing the region, or None if it is unbounded."""
        return None

    def __invert__(self) -> 'Region':
        """Get the complement."""
        return Complement(self)

    def __and__(self, other: 'Region') -> 'Region':
        """Get the intersection."""
        return Combination(self, other, np.logical_and)

    def __or__(self, other: 'Region') -> 'Region':
        """Get the union."""
        return Combination(self, other, np.logical_or)

    def __sub__(self, other: 'Region') -> 'Region':
        """Get the difference."""
        return Combination(self, Complement(other), np.logical_and)


class Ball(Region):
    """Open ball."""

    def __init__(self, center: ArrayLike, radius: float) -> None:
        """Create a Ball."""
        c = np.asarray(center, dtype=float)
        super().__init__(len(c))
        if not radius > 0.0:
            raise ConfigError(f'ball radius must be positive, got {radius}', 'region')
        self.center = c
        self.radius = radius

    def steps(self, origins: Array, dirs: Array) -> Steps:  # noqa: D102
        t0, t1 = ball_interval(origins, dirs, self.center, self.radius)
        hit = np.isfinite(t0)
        breaks = np.where(hit[:, None], np.stack([t0, t1], axis=1), np.nan)
        none = np.zeros(len(origins), dtype=bool)
        return Steps(breaks, none, none.copy())

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        return self.center, self.radius


class HalfSpace(Region):
    """Open half-space {x : (x − p)·ν < 0}."""

    def __init__(self, point: ArrayLike, normal: ArrayLike) -> None:
        """Create a HalfSpace."""
        p = np.asarray(point, dtype=float)
        super().__init__(len(p))
        nu = np.asarray(normal, dtype=float)
        self.point = p
        self.normal = nu / np.linalg.norm(nu)

    def steps(self, origins: Array, dirs: Array) -> Steps:  # noqa: D102
        slope = dirs @ self.normal
        offset = (origins - self.point) @ self.normal
        crossing = slope != 0.0
        with np.errstate(divide='ignore', invalid='ignore'):
            t = np.where(crossing, -offset / np.where(crossing, slope, 1.0), np.nan)
        start = np.where(crossing, slope > 0.0, offset < 0.0)
        return Steps(t[:, None], start, np.zeros(len(origins), dtype=bool))


class CrossingParity(Region):
    """
    Points reached from infinity through an odd number of surface crossings.

    For a closed surface this is the enclosed region; for a surface with boundary it is
    one side of the crossing-parity relation.
    """

    def __init__(self, scene: SurfaceScene) -> None:
        """Create a CrossingParity region of a bounded scene."""
        super().__init__(scene.dim)
        ball = scene.bounding_ball()
        if ball is None:
            raise ConfigError(f'scene {scene.name()} is unbounded', 'scene')
        self.scene = scene
        self.ball = ball

    def steps(self, origins: Array, dirs: Array) -> Steps:  # noqa: D102
        center, radius = self.ball
        reach = 1.01 * radius
        foot = origins + ((center - origins) * dirs).sum(axis=1)[:, None] * dirs
        shift = ((foot - origins) * dirs).sum(axis=1) - reach
        hits = self.scene.ray_hits(foot - reach * dirs, dirs, 2.0 * reach)
        breaks = hits.t + shift[:, None]
        return Steps(breaks, np.zeros(len(origins), dtype=bool), hits.tangent.copy())

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        return self.ball


class Complement(Region):
    """Complement of a region."""

    def __init__(self, inner: Region) -> None:
        """Create a Complement."""
        super().__init__(inner.dim)
        self.inner = inner

    def steps(self, origins: Array, dirs: Array) -> Steps:  # noqa: D102
        s = self.inner.steps(origins, dirs)
        return Steps(s.breaks, ~s.start, s.tangent)


class Combination(Region):
    """Pointwise boolean combination of two regions."""

    def __init__(
        self,
        left: Region,
        right: Region,
        op: Callable[[BoolArray, BoolArray], BoolArray],
    ) -> None:
        """Create a Combination."""
        if left.dim != right.dim:
            raise ConfigError('regions have different dimensions', 'region')
        super().__init__(left.dim)
        self.left = left
        self.right = right
        self.op = op

    def steps(self, origins: Array, dirs: Array) -> Steps:  # noqa: D102
        return combine(self.left.steps(origins, dirs), self.right.steps(origins, dirs), self.op)

    def bounding_ball(self) -> Optional[Tuple[Array, float]]:  # noqa: D102
        left = self.left.bounding_ball()
        right = self.right.bounding_ball()
        if self.op is np.logical_and:
            return left if left is not None else right
        if left is None or right is None:
            return None
        return _enclosing_ball(left, right)


def _enclosing_ball(a: Tuple[Array, float], b: Tuple[Array, float]) -> Tuple[Array, float]:
    center = 0.5 * (a[0] + b[0])
    return center, float(max(
        np.linalg.norm(a[0] - center) + a[1], np.linalg.norm(b[0] - center) + b[1]))


def _power(x: Array, sigma: float) -> Array:
    return np.asarray(x ** (1.0 - sigma) / (sigma * (1.0 - sigma)))


def interval_energy(
    a: Array,
    b: Array,
    c: Array,
    d: Array,
    sigma: float,
) -> Array:
    """
    Integrate |t−s|^{-1-σ} over s ∈ [a, b], t ∈ [c, d] for intervals with b <= c.

    With P(x) = x^{1−σ}/(σ(1−σ)) the value is P(d−b) − P(c−b) − P(d−a) + P(c−a); a may be
    −∞ or d may be +∞ (not both).
    """
    left_open = ~np.isfinite(a)
    right_open = ~np.isfinite(d)
    a0 = np.where(left_open, 0.0, a)
    d0 = np.where(right_open, 0.0, d)
    gap = np.maximum(c - b, 0.0)
    inner = _power(np.maximum(d0 - b, 0.0), sigma) - _power(gap, sigma)
    outer = _power(np.maximum(c - a0, 0.0), sigma) - _power(np.maximum(d0 - a0, 0.0), sigma)
    both = inner + outer
    only_right = _power(np.maximum(c - a0, 0.0), sigma) - _power(gap, sigma)
    return np.asarray(np.where(
        left_open & right_open, np.inf,
        np.where(right_open, only_right, np.where(left_open, inner, both))))


def line_energy(first: Steps, second: Steps, sigma: float) -> Array:
    """
    Integrate |t−s|^{-1-σ} over first × second along every line.

    :raises ConfigError: if the two sets overlap on a line
    """
    lo_a, hi_a, in_a = first.segments()
    lo_b, hi_b, in_b = second.segments()
    la, ha = lo_a[:, :, None], hi_a[:, :, None]
    lb, hb = lo_b[:, None, :], hi_b[:, None, :]
    active = in_a[:, :, None] & in_b[:, None, :]
    with np.errstate(invalid='ignore'):
        overlap = np.minimum(ha, hb) - np.maximum(la, lb)
        if np.any(active & (overlap > OVERLAP_TOLERANCE * np.maximum(1.0, np.abs(ha)))):
            raise ConfigError('interaction sets must be disjoint', 'region')
        b_right = lb >= ha - OVERLAP_TOLERANCE * np.maximum(1.0, np.abs(ha))
        s_lo = np.where(b_right, la, lb)
        s_hi = np.where(b_right, ha, hb)
        t_lo = np.where(b_right, lb, la)
        t_hi = np.where(b_right, hb, ha)
        energy = interval_energy(s_lo, s_hi, t_lo, t_hi, sigma)
    return np.asarray(np.where(active, energy, 0.0).sum(axis=(1, 2)))


@dataclass(frozen=True)
class Estimate:
    """Monte-Carlo estimate with its batch-means standard error."""

    value: float
    std_error: float
    samples: int

    def agrees(self, other: 'Estimate', k: float = 3.0) -> bool:
        """Check agreement within k combined standard errors."""
        return abs(self.value - other.value) <= k * math.hypot(self.std_error, other.std_error)


LineFunctional = Callable[[Array, Array], Tuple[Array, BoolArray]]


def _sample_lines(
    rng: np.random.Generator,
    count: int,
    center: Array,
    radius: float,
) -> Tuple[Array, Array]:
    """Draw isotropic lines through a ball as antithetic pairs ±p of foot points."""
    n = len(center)
    half = (count + 1) // 2
    dirs = random_unit_vectors(rng, half, n)
    g = rng.standard_normal((half, n))
    g -= (g * dirs).sum(axis=1)[:, None] * dirs
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rho = radius * rng.random(half) ** (1.0 / (n - 1))
    foot = rho[:, None] * g
    origins = np.concatenate([center + foot, center - foot])[:count]
    return origins, np.concatenate([dirs, dirs])[:count]


def line_integral(
    functional: LineFunctional,
    center: ArrayLike,
    radius: float,
    dim: int,
    spec: QuadratureSpec,
    threads: int = 1,
) -> Estimate:
    """
    Estimate (1/2α_{n−1}) ∫_{S^{n−1}} ∫_{u⊥} F(line) dp du over lines meeting a ball.

    A double integral over pairs maps onto lines through
    ∫∫ f(x, y) dx dy = ½ ∫_{S^{n−1}} ∫_{u⊥} ∫∫ |s−t|^{n−1} f(p+su, p+tu) ds dt dp du, and F
    integrates the pair kernel in closed form along the line, so the estimate is
    (1/α_{n−1}) ∫∫ f with α_{n−1} the volume of the unit ball in R^(n−1). This is exact
    importance sampling in |x−y|: only the line is random, never the separation.

    Lines touching a surface tangentially are redrawn. Batches use independent child
    seeds, so results do not depend on the thread count.

    :param functional: maps (origins, dirs) to per-line values and tangency flags
    :return: the estimate with its standard error over 32 batch means
    """
    c = np.asarray(center, dtype=float)
    per_batch = max(2, spec.mc_samples // BATCHES)
    seeds = np.random.SeedSequence(spec.rng_seed).spawn(BATCHES)
    measure = 0.5 * unit_sphere_measure(dim - 1) * radius ** (dim - 1)

    def batch(seed: np.random.SeedSequence) -> float:
        rng = np.random.default_rng(seed)
        origins, dirs = _sample_lines(rng, per_batch, c, radius)
        values, tangent = functional(origins, dirs)
        for _ in range(LINE_REDRAWS):
            redo = np.nonzero(tangent)[0]
            if not len(redo):
                break
            o2, d2 = _sample_lines(rng, len(redo), c, radius)
            new_values, new_tangent = functional(o2, d2)
            values[redo] = new_values
            tangent[redo] = new_tangent
        return float(measure * values.mean())

    means = np.array(run_tasks(batch, seeds, threads))
    value = float(means.mean())
    error = float(means.std(ddof=1) / math.sqrt(BATCHES))
    logger.verbose_print(
        f'Monte-Carlo over {per_batch * BATCHES} lines: {value!r} ± {error:.3e}')
    return Estimate(value=value, std_error=error, samples=per_batch * BATCHES)


def _bounds(
    regions: Tuple[Region, ...],
    bounds: Optional[Tuple[ArrayLike, float]],
) -> Tuple[Array, float]:
    if bounds is not None:
        return np.asarray(bounds[0], dtype=float), float(bounds[1])
    balls = [r.bounding_ball() for r in regions]
    known = [b for b in balls if b is not None]
    if not known:
        raise ConfigError('no bounded region to sample lines from', 'region')
    ball = known[0]
    for other in known[1:]:
        ball = _enclosing_ball(ball, other)
    return ball


def mc_double_integral(
    first: Region,
    second: Region,
    sigma: float,
    spec: QuadratureSpec,
    bounds: Optional[Tuple[ArrayLike, float]] = None,
    threads: int = 1,
) -> Estimate:
    """
    Estimate the interaction (1/α_{n−1}) ∫_A ∫_B |x−y|^{-n-σ} dx dy of disjoint sets.

    :param bounds: a ball (center, radius) containing the bounded one of the two sets;
        inferred from the regions when omitted
    """
    center, radius = _bounds((first, second), bounds)

    def functional(origins: Array, dirs: Array) -> Tuple[Array, BoolArray]:
        a = first.steps(origins, dirs)
        b = second.steps(origins, dirs)
        return line_energy(a, b, sigma), a.tangent | b.tangent

    # Line measure cancels the α_{n−1} of the kernel normalization
    return line_integral(functional, center, radius, first.dim, spec, threads)


def sigma_perimeter(
    body: Region,
    omega: Region,
    sigma: float,
    spec: QuadratureSpec,
    bounds: Optional[Tuple[ArrayLike, float]] = None,
    threads: int = 1,
) -> Estimate:
    """
    Estimate the σ-perimeter of E relative to Ω.

    It is the sum of the interactions of E∩Ω with ∁E∩Ω, E∩Ω with ∁E∖Ω and E∖Ω with ∁E∩Ω.
    """
    center, radius = _bounds((body, omega), bounds)
    outside = ~body
    terms = (
        (body & omega, outside & omega),
        (body & omega, outside - omega),
        (body - omega, outside & omega),
    )

    def functional(origins: Array, dirs: Array) -> Tuple[Array, BoolArray]:
        total = np.zeros(len(origins))
        tangent = np.zeros(len(origins), dtype=bool)
        for a, b in terms:
            sa = a.steps(origins, dirs)
            sb = b.steps(origins, dirs)
            total += line_energy(sa, sb, sigma)
            tangent |= sa.tangent | sb.tangent
        return total, tangent

    return line_integral(functional, center, radius, body.dim, spec, threads)


def sigma_area(
    scene: SurfaceScene,
    omega: Region,
    sigma: float,
    spec: QuadratureSpec,
    bounds: Optional[Tuple[ArrayLike, float]] = None,
    threads: int = 1,
) -> Estimate:
    """
    Estimate the σ-area of a surface relative to Ω.

    Pairs whose segment crosses the surface an odd number of times split every line into
    even and odd parity classes; the weight max{χ_Ω(x), χ_Ω(y)} removes the pairs with
    both points outside Ω.
    """
    odd = CrossingParity(scene)
    center, radius = _bounds((odd, omega), bounds)

    def functional(origins: Array, dirs: Array) -> Tuple[Array, BoolArray]:
        s_odd = odd.steps(origins, dirs)
        s_even = Steps(s_odd.breaks, ~s_odd.start, s_odd.tangent)
        s_out = (~omega).steps(origins, dirs)
        full = line_energy(s_even, s_odd, sigma)
        excluded = line_energy(
            combine(s_even, s_out, np.logical_and),
            combine(s_odd, s_out, np.logical_and),
            sigma,
        )
        return full - excluded, s_odd.tangent.copy()

    return line_integral(functional, center, radius, scene.dim, spec, threads)
