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

"""Fractional gradient, divergence, Laplacian and Hessian on sampled fields."""

from dataclasses import dataclass
from itertools import product
import math
from typing import Dict
from typing import Iterator
from typing import List
from typing import Sequence
from typing import Tuple
import warnings

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate
from scipy import ndimage
from scipy import signal
from scipy import special

from .errors import ConfigError
from .errors import PointNotOnSurface
from .errors import QuadBudgetExceeded
from .errors import TruncationWarning
from .errors import UnsupportedDecay
from .fieldio import Array
from .fieldio import Decay
from .fieldio import GridField
from .logger import logger
from .quadrature import sphere_grid
from .specfun import gamma
from .specfun import mu_alpha
from .specfun import nu_alpha
from .specfun import sphere_measure_constant
from .specfun import unit_sphere_measure
from .surface import LevelSetScene


Multi = Tuple[int, ...]

# Cutoff width η in lattice spacings; the aliasing error is about exp(-π²η²/h²)
CUTOFF_WIDTH = 3.0
# The cutoff is below 1e-20 beyond this many widths
STENCIL_REACH = 7.0
# Odd kernels need the order-5 moments
TAYLOR_ORDER = 5
FIRST_DERIVATIVE = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
SECOND_DERIVATIVE = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
DERIVATIVE_STEPS = {1: (1,), 2: (2,), 3: (2, 1), 4: (2, 2), 5: (2, 2, 1)}
TAIL_WARNING_RATIO = 1e-3
COMPARISON_REGION = 0.25

PARTITION_WIDTH = 0.45
PARTITION_POWER = 8
IDENTITY_MAX_DOUBLINGS = 5
IDENTITY_TOLERANCE = 1e-7


def sphere_monomial_integral(powers: Sequence[int]) -> float:
    """
    Integrate a monomial over the unit sphere S^{n-1}, n = len(powers).

    :return: 2 Π Γ((m_i+1)/2) / Γ((|m|+n)/2) if every m_i is even, else 0
    """
    if any(m % 2 for m in powers):
        return 0.0
    numerator = 2.0
    for m in powers:
        numerator *= gamma(0.5 * (m + 1))
    return numerator / gamma(0.5 * (sum(powers) + len(powers)))


def ewald_cutoff(r: ArrayLike, width: float, index: float) -> Array:
    """
    Get the cutoff Q(index, r²/width²), the regularized upper incomplete gamma function.

    It is 1 at the origin and decays like a Gaussian. With index = p/2 + j for an integer
    j >= 0, the complement times |v|^{-p} is smooth at the origin.
    """
    rr = np.asarray(r, dtype=float)
    return np.asarray(special.gammaincc(index, (rr / width) ** 2))


def _radial_cutoff_integral(exponent: float, width: float, index: float, upper: bool) -> float:
    # ∫_0^∞ r^exponent Q(index, r²/η²) dr (upper) or the same with P = 1 - Q (not upper)
    b = 0.5 * (exponent + 1.0)
    scale = 0.5 * width ** (2.0 * b) * gamma(index + b) / (b * gamma(index))
    if upper:
        if b <= 0.0:
            raise ConfigError(f'moment of order {exponent} diverges at the origin', 'kernel')
        return scale
    if not -index < b < 0.0:
        raise ConfigError(f'far-field integral of order {exponent} diverges', 'kernel')
    return -scale


@dataclass(frozen=True)
class KernelTerm:
    """One term coef · v^powers · |v|^(-exponent) of a lattice kernel."""

    coef: float
    powers: Multi
    exponent: float

    def evaluate(self, v: Array, r: Array) -> Array:
        """Evaluate at offsets v with norms r; zero at the origin."""
        safe = np.where(r > 0.0, r, 1.0)
        mono = np.prod(v ** np.asarray(self.powers), axis=-1)
        return np.where(r > 0.0, self.coef * mono * safe ** (-self.exponent), 0.0)

    def even_with(self, gamma_index: Multi) -> bool:
        """Check whether v^gamma times this term has an even exponent in every coordinate."""
        return all((m + g) % 2 == 0 for m, g in zip(self.powers, gamma_index))


@dataclass(frozen=True)
class LatticeKernel:
    """
    Kernel K(v) = Σ coef v^μ |v|^{-p} of an operator ∫ (f(x+v) - f(x)) K(v) dv.

    cutoff_index selects the Ewald cutoff shared by every term.
    """

    terms: Tuple[KernelTerm, ...]
    cutoff_index: float

    def evaluate(self, v: Array) -> Array:
        """Evaluate at offsets of shape (..., n)."""
        r = np.linalg.norm(v, axis=-1)
        total = np.zeros(r.shape)
        for term in self.terms:
            total = total + term.evaluate(v, r)
        return total

    def active(self, gamma_index: Multi) -> bool:
        """Check whether the moment of v^gamma can be nonzero."""
        return any(term.even_with(gamma_index) for term in self.terms)

    def moment(self, gamma_index: Multi, width: float) -> float:
        """Get the exact integral of Q · v^gamma · K over R^n."""
        dim = len(gamma_index)
        total = 0.0
        for term in self.terms:
            powers = tuple(m + g for m, g in zip(term.powers, gamma_index))
            sphere = sphere_monomial_integral(powers)
            if sphere == 0.0:
                continue
            exponent = sum(powers) - term.exponent + dim - 1
            total += term.coef * sphere * _radial_cutoff_integral(
                exponent, width, self.cutoff_index, upper=True)
        return total

    def far_constant(self, width: float, dim: int) -> float:
        """Get the exact integral of (1 - Q) · K over R^n."""
        total = 0.0
        for term in self.terms:
            sphere = sphere_monomial_integral(term.powers)
            if sphere == 0.0:
                continue
            exponent = sum(term.powers) - term.exponent + dim - 1
            total += term.coef * sphere * _radial_cutoff_integral(
                exponent, width, self.cutoff_index, upper=False)
        return total

    def magnitude_at(self, radius: float) -> float:
        """Bound |K(v)| for |v| >= radius."""
        return sum(abs(t.coef) * radius ** (sum(t.powers) - t.exponent) for t in self.terms)


def _unit(dim: int, i: int, count: int = 1) -> Multi:
    return tuple(count if j == i else 0 for j in range(dim))


def gradient_kernels(dim: int, alpha: float) -> List[LatticeKernel]:
    """Get the component kernels v_j |v|^{-n-α-1} of the fractional gradient."""
    p = dim + alpha + 1.0
    return [
        LatticeKernel(terms=(KernelTerm(1.0, _unit(dim, j), p),), cutoff_index=0.5 * p)
        for j in range(dim)
    ]


def laplacian_kernel(dim: int, alpha: float) -> LatticeKernel:
    """Get the kernel |v|^{-n-α} of the fractional Laplacian."""
    p = dim + alpha
    return LatticeKernel(terms=(KernelTerm(1.0, (0,) * dim, p),), cutoff_index=0.5 * p + 1.0)


def hessian_kernels(dim: int, order: float) -> Dict[Tuple[int, int], LatticeKernel]:
    """
    Get the entries (n+s) v_i v_j |v|^{-n-s-2} - δ_ij |v|^{-n-s} of the Hessian kernel.

    The cutoff matches the fractional Laplacian of order s, so the kernel trace reproduces it.
    """
    index = 0.5 * (dim + order) + 1.0
    kernels: Dict[Tuple[int, int], LatticeKernel] = {}
    for i in range(dim):
        for j in range(i, dim):
            powers = tuple(int(k == i) + int(k == j) for k in range(dim))
            terms = [KernelTerm(dim + order, powers, dim + order + 2.0)]
            if i == j:
                terms.append(KernelTerm(-1.0, (0,) * dim, dim + order))
            kernels[(i, j)] = LatticeKernel(terms=tuple(terms), cutoff_index=index)
    return kernels


def taylor_indices(dim: int) -> List[Multi]:
    """Get the multi-indices of the Taylor correction, 1 <= |γ| <= 5."""
    return [
        g for g in product(range(TAYLOR_ORDER + 1), repeat=dim)
        if 1 <= sum(g) <= TAYLOR_ORDER
    ]


class LatticeSum:
    """
    Moment-corrected lattice quadrature of ∫ (F(x+v) - F(x)) K(v) dv at every node.

    The field is zero outside the box. The sum over lattice offsets is corrected by the
    exact far-field constant and by Taylor moments of the cutoff kernel, using 6th-order
    finite-difference derivatives.
    """

    def __init__(self, values: Array, spacing: float) -> None:
        """
        Create a LatticeSum.

        :param values: the scalar field, background already removed
        :param spacing: the lattice spacing h
        """
        self.values = values
        self.spacing = spacing
        self.dim = values.ndim
        self.width = CUTOFF_WIDTH * spacing
        count = values.shape[0]
        offsets = spacing * np.arange(-(count - 1), count)
        self.__offsets = np.stack(np.meshgrid(*([offsets] * self.dim), indexing='ij'), axis=-1)
        reach = int(math.ceil(STENCIL_REACH * CUTOFF_WIDTH))
        local = spacing * np.arange(-reach, reach + 1)
        self.__stencil = np.stack(np.meshgrid(*([local] * self.dim), indexing='ij'), axis=-1)
        self.__stencil_r = np.linalg.norm(self.__stencil, axis=-1)
        self.__derivatives: Dict[Multi, Array] = {}

    def derivative(self, gamma_index: Multi) -> Array:
        """Get the finite-difference derivative D^γ F, cached."""
        if gamma_index not in self.__derivatives:
            out = self.values
            for axis, order in enumerate(gamma_index):
                for step in DERIVATIVE_STEPS.get(order, ()):
                    weights = FIRST_DERIVATIVE if step == 1 else SECOND_DERIVATIVE
                    out = ndimage.correlate1d(
                        out, weights / self.spacing ** step, axis=axis,
                        mode='constant', cval=0.0)
            self.__derivatives[gamma_index] = out
        return self.__derivatives[gamma_index]

    def apply(self, kernel: LatticeKernel) -> Array:
        """Apply a kernel at every node."""
        cell = self.spacing ** self.dim
        weights = kernel.evaluate(-self.__offsets) * cell
        out = signal.fftconvolve(self.values, weights, mode='same')
        chi = ewald_cutoff(self.__stencil_r, self.width, kernel.cutoff_index)
        base = kernel.evaluate(self.__stencil) * chi * cell
        out = out - self.values * (float(np.sum(base)) + kernel.far_constant(self.width, self.dim))
        for gamma_index in taylor_indices(self.dim):
            if not kernel.active(gamma_index):
                continue
            mono = np.prod(self.__stencil ** np.asarray(gamma_index), axis=-1)
            lattice = float(np.sum(base * mono))
            correction = lattice - kernel.moment(gamma_index, self.width)
            factorial = math.prod(math.factorial(g) for g in gamma_index)
            out = out - self.derivative(gamma_index) * (correction / factorial)
        return np.asarray(out)


def _check_order(value: float, name: str, upper: float) -> None:
    if not 0.0 < value < upper:
        raise ConfigError(f'order must lie in (0, {upper:g}), got {value}', name)


def _check_decay(field: GridField) -> float:
    mass = field.decay.mass_outside(0.5 * field.length, field.dim)
    if math.isinf(mass):
        raise UnsupportedDecay(
            f"a field with {field.decay.kind} decay (scale {field.decay.scale:g}) has no "
            f'bounded tail outside a box of side {field.length:g}')
    return mass


def _components(field: GridField, skip_last: bool = False) -> Iterator[Multi]:
    shape = field.component_shape[:-1] if skip_last else field.component_shape
    return iter(np.ndindex(*shape))


def _edge_magnitude(values: Array, dim: int) -> float:
    edge = 0.0
    for axis in range(dim):
        for index in (0, -1):
            edge = max(edge, float(np.max(np.abs(np.take(values, index, axis=axis)))))
    return edge


def _result(
    field: GridField,
    values: Array,
    order: float,
    prefactor: float,
    kernels: Sequence[LatticeKernel],
    mass: float,
    name: str,
) -> GridField:
    exponent = field.dim + order
    half = 0.5 * field.length
    amplitude = _edge_magnitude(values, field.dim) * half ** exponent
    tail = abs(prefactor) * max(k.magnitude_at(0.5 * half) for k in kernels) * mass
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    logger.verbose_print(
        f'{name}: {field.count}^{field.dim} nodes, h={field.spacing:g}, tail bound {tail:.3g}')
    if tail > TAIL_WARNING_RATIO * peak:
        warnings.warn(
            f'{name}: truncated tail bound {tail:.3g} exceeds {TAIL_WARNING_RATIO:g} of the '
            f'peak {peak:.3g}', TruncationWarning)
    return field.with_values(
        values,
        decay=Decay('algebraic', exponent, amplitude),
        tail_bound=tail,
    )


def frac_gradient(field: GridField, alpha: float) -> GridField:
    """
    Apply the fractional gradient μ_α ∫ f(y) ⊗ (y-x) / |x-y|^{n+α+1} dy.

    A new last axis of size n holds the derivative direction.

    :param field: scalar, vector or matrix field
    :param alpha: the order, in (0, 1)
    :return: the field of gradients, with algebraic decay of exponent n+α
    """
    _check_order(alpha, 'alpha', 1.0)
    mass = _check_decay(field)
    dim = field.dim
    mu = mu_alpha(alpha, dim)
    kernels = gradient_kernels(dim, alpha)
    out = np.zeros(field.values.shape + (dim,))
    for idx in _components(field):
        lattice = LatticeSum(field.values[(Ellipsis,) + idx] - field.decay.background,
                             field.spacing)
        for j, kernel in enumerate(kernels):
            out[(Ellipsis,) + idx + (j,)] = mu * lattice.apply(kernel)
    return _result(field, out, alpha, mu, kernels, mass, 'gradient')


def frac_divergence(field: GridField, alpha: float) -> GridField:
    """
    Apply the fractional divergence μ_α ∫ (w(y) - w(x)) · (y-x) / |x-y|^{n+α+1} dy.

    The contraction runs over the last component axis, which must have size n.
    """
    _check_order(alpha, 'alpha', 1.0)
    dim = field.dim
    if field.component_shape[-1:] != (dim,):
        raise ConfigError('divergence needs a vector field', 'field')
    mass = _check_decay(field)
    mu = mu_alpha(alpha, dim)
    kernels = gradient_kernels(dim, alpha)
    out = np.zeros(field.values.shape[:-1])
    for idx in _components(field, skip_last=True):
        total = np.zeros(field.values.shape[:dim])
        for j, kernel in enumerate(kernels):
            comp = field.values[(Ellipsis,) + idx + (j,)] - field.decay.background
            total = total + LatticeSum(comp, field.spacing).apply(kernel)
        out[(Ellipsis,) + idx] = mu * total
    return _result(field, out, alpha, mu, kernels, mass, 'divergence')


def frac_laplacian(field: GridField, alpha: float) -> GridField:
    """
    Apply the fractional Laplacian ν_α ∫ (f(y) - f(x)) / |x-y|^{n+α} dy componentwise.

    :param alpha: the order, in (0, 2)
    """
    _check_order(alpha, 'alpha', 2.0)
    mass = _check_decay(field)
    dim = field.dim
    nu = nu_alpha(alpha, dim)
    kernel = laplacian_kernel(dim, alpha)
    out = np.zeros(field.values.shape)
    for idx in _components(field):
        comp = field.values[(Ellipsis,) + idx] - field.decay.background
        out[(Ellipsis,) + idx] = nu * LatticeSum(comp, field.spacing).apply(kernel)
    return _result(field, out, alpha, nu, [kernel], mass, 'laplacian')


def frac_hessian_direct(field: GridField, alpha: float, beta: float) -> GridField:
    """
    Apply ∇^α ∇^β through its single integral with the kernel of hessian_kernel.

    The result is (-ν_s/s) ∫ (f(x+v) - f(x)) |v|^{-n-s} ((n+s) v̂ ⊗ v̂ - 1) dv, s = α+β.

    :param field: a scalar field, or any field whose components are treated independently
    :return: a field with two new trailing axes of size n, symmetric in them
    """
    _check_order(alpha, 'alpha', 1.0)
    _check_order(beta, 'beta', 1.0)
    mass = _check_decay(field)
    dim = field.dim
    order = alpha + beta
    prefactor = -nu_alpha(order, dim) / order
    kernels = hessian_kernels(dim, order)
    out = np.zeros(field.values.shape + (dim, dim))
    for idx in _components(field):
        lattice = LatticeSum(field.values[(Ellipsis,) + idx] - field.decay.background,
                             field.spacing)
        for (i, j), kernel in kernels.items():
            entry = prefactor * lattice.apply(kernel)
            out[(Ellipsis,) + idx + (i, j)] = entry
            out[(Ellipsis,) + idx + (j, i)] = entry
    return _result(field, out, order, prefactor, list(kernels.values()), mass, 'hessian')


def central_mask(field: GridField, region: float = COMPARISON_REGION) -> Array:
    """Get the nodes with |x|_∞ <= region · L, the central half box by default."""
    axis = np.abs(field.axis()) <= region * field.length + 1e-12 * field.length
    masks = np.meshgrid(*([axis] * field.dim), indexing='ij')
    return np.asarray(np.logical_and.reduce(masks))


def l2_relative(
    actual: GridField,
    expected: GridField,
    region: float = COMPARISON_REGION,
) -> float:
    """
    Get ‖actual - expected‖ / ‖expected‖ in L² over the central part of the box.

    The tails of algebraically decaying outputs are truncated at the box, so comparisons stay
    away from its faces.
    """
    mask = central_mask(expected, region)
    diff = (actual.values - expected.values)[mask]
    ref = expected.values[mask]
    norm = float(np.linalg.norm(ref))
    err = float(np.linalg.norm(diff))
    return err / norm if norm > 0.0 else err


def divid_residual(field: GridField, alpha: float, beta: float) -> float:
    """Get the relative L² residual of div^α(∇^β f) + (-Δ)^{(α+β)/2} f."""
    composed = frac_divergence(frac_gradient(field, beta), alpha)
    lap = frac_laplacian(field, alpha + beta)
    return l2_relative(composed, lap.with_values(-lap.values))


@dataclass(frozen=True)
class FracKernelTensor:
    """The Hessian kernel (-ν_s/s) |v|^{-n-s} ((n+s) v̂ ⊗ v̂ - 1) at an offset v, s = α+β."""

    v: Array
    alpha: float
    beta: float
    matrix: Array

    def trace(self) -> float:
        """Get the trace, (-ν_s/s) |v|^{-n-s} s."""
        return float(np.trace(self.matrix))


def hessian_kernel(v: ArrayLike, alpha: float, beta: float) -> FracKernelTensor:
    """Evaluate the Hessian kernel at a nonzero offset."""
    vec = np.asarray(v, dtype=float)
    dim = len(vec)
    r = float(np.linalg.norm(vec))
    if r == 0.0:
        raise ConfigError('the kernel offset must be nonzero', 'v')
    s = alpha + beta
    unit = vec / r
    matrix = (-nu_alpha(s, dim) / s) * r ** (-dim - s) * (
        (dim + s) * np.outer(unit, unit) - np.eye(dim))
    return FracKernelTensor(v=vec, alpha=alpha, beta=beta, matrix=matrix)


@dataclass(frozen=True)
class KernelIdentity:
    """Both sides of the composed-kernel identity at one offset."""

    lhs: Array
    rhs: Array
    rel_err: float
    resolution: int


def _partition(r: Array, width: float) -> Array:
    return np.asarray(np.exp(-(r / width) ** PARTITION_POWER))


def _directions(dim: int, resolution: int) -> Tuple[Array, Array]:
    if dim == 2:
        return sphere_grid(1, 64 * resolution, 0.5)
    return sphere_grid(2, 32 * resolution, 0.5)


def _jacobi_interval(count: int, length: float, power: float) -> Tuple[Array, Array]:
    # Nodes and weights for ∫_0^length r^power g(r) dr
    x, w = special.roots_jacobi(count, 0.0, power)
    r = 0.5 * length * (1.0 + x)
    return np.asarray(r), np.asarray((0.5 * length) ** (1.0 + power) * w)


def _composite_legendre(lo: float, hi: float, panels: int, nodes: int) -> Tuple[Array, Array]:
    x, w = special.roots_legendre(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    return r, (half[:, None] * w[None, :]).ravel()


def _outer_sum(
    weights: Array,
    left: Array,
    right: Array,
    scale: Array,
) -> Array:
    # Σ_d weights_d left_d ⊗ right_d scale_d, batched over a leading radial axis
    return np.asarray(np.einsum('d,mdi,mdj,md->mij', weights, left, right, scale))


def _composed_kernel(v: Array, alpha: float, beta: float, resolution: int) -> Array:
    dim = len(v)
    norm = float(np.linalg.norm(v))
    width = PARTITION_WIDTH * norm
    reach = 2.0 * width
    dirs, dw = _directions(dim, resolution)
    total = np.zeros((dim, dim))

    # Polar patch about u = 0; the symmetric grid cancels the odd leading term
    r, w = _jacobi_interval(32 * resolution, reach, -alpha)
    diff = v[None, None, :] - r[:, None, None] * dirs[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    g = _outer_sum(dw, diff, np.broadcast_to(dirs, diff.shape), dist ** (-dim - beta - 1.0))
    total += np.einsum('m,mij->ij', w * _partition(r, width) / r, g)

    # Polar patch about u = v
    r, w = _jacobi_interval(32 * resolution, reach, -beta)
    shifted = v[None, None, :] + r[:, None, None] * dirs[None, :, :]
    dist = np.linalg.norm(shifted, axis=-1)
    h = _outer_sum(dw, -np.broadcast_to(dirs, shifted.shape), shifted,
                   dist ** (-dim - alpha - 1.0))
    total += np.einsum('m,mij->ij', w * _partition(r, width) / r, h)

    # Everything else, in polar coordinates about the origin
    outer = 3.0 * norm
    r_in, w_in = _composite_legendre(0.0, outer, 16 * resolution, 8)
    power = dim + alpha + beta - 1.0
    s, ws = _jacobi_interval(16 * resolution, 1.0, power)
    r_out = outer / s
    w_out = ws * outer / s ** (2.0 + power)
    radii = np.concatenate([r_in, r_out])
    weights = np.concatenate([w_in, w_out])
    for start in range(0, len(radii), 64):
        rr = radii[start:start + 64]
        u = rr[:, None, None] * dirs[None, :, :]
        rest = v[None, None, :] - u
        to_v = np.linalg.norm(rest, axis=-1)
        keep = 1.0 - _partition(rr, width)[:, None] - _partition(to_v, width)
        with np.errstate(divide='ignore', invalid='ignore'):
            scale = np.where(
                to_v > 0.0,
                keep * to_v ** (-dim - beta - 1.0) * rr[:, None] ** (-dim - alpha - 1.0),
                0.0,
            )
        block = _outer_sum(dw, rest, u, scale)
        total += np.einsum('m,mij->ij', weights[start:start + 64] * rr ** (dim - 1), block)
    return total


def hessian_kernel_identity_check(
    v: ArrayLike,
    alpha: float,
    beta: float,
    resolution: int = 1,
    tolerance: float = IDENTITY_TOLERANCE,
) -> KernelIdentity:
    """
    Check that composing the two gradient kernels gives the Hessian kernel.

    The left side ∫ (v-u) ⊗ u / (|u-v|^{n+β+1} |u|^{n+α+1}) du is integrated with polar
    patches about both singular points, a smooth partition of unity, and an inverted radial
    variable at infinity; the resolution doubles until successive values agree.

    :param v: the nonzero offset, in R^2 or R^3
    :param resolution: the starting resolution
    :param tolerance: the relative agreement required between successive resolutions
    :return: lhs, rhs = hessian_kernel / (μ_α μ_β), and their relative difference
    """
    vec = np.asarray(v, dtype=float)
    if len(vec) not in (2, 3):
        raise ConfigError(f'the kernel identity check runs in 2 or 3 dimensions, got {len(vec)}',
                          'v')
    if float(np.linalg.norm(vec)) == 0.0:
        raise ConfigError('the kernel offset must be nonzero', 'v')
    _check_order(alpha, 'alpha', 1.0)
    _check_order(beta, 'beta', 1.0)
    level = resolution
    previous = _composed_kernel(vec, alpha, beta, level)
    for _ in range(IDENTITY_MAX_DOUBLINGS):
        level *= 2
        lhs = _composed_kernel(vec, alpha, beta, level)
        change = float(np.linalg.norm(lhs - previous))
        logger.verbose_print(f'kernel identity: resolution {level}, change {change:.3g}')
        if change <= tolerance * float(np.linalg.norm(lhs)):
            break
        previous = lhs
    else:
        raise QuadBudgetExceeded(
            f'kernel identity integral did not settle to {tolerance:g} by resolution {level}')
    dim = len(vec)
    rhs = hessian_kernel(vec, alpha, beta).matrix / (mu_alpha(alpha, dim) * mu_alpha(beta, dim))
    rel = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    return KernelIdentity(lhs=lhs, rhs=rhs, rel_err=rel, resolution=level)


@dataclass(frozen=True)
class ClosedFormCheck:
    """A numerically computed value next to its closed form."""

    numeric: float
    closed_form: float

    @property
    def relative_error(self) -> float:
        """Get |numeric - closed_form| / |closed_form|."""
        return abs(self.numeric - self.closed_form) / abs(self.closed_form)


def heat_kernel(u: ArrayLike, t: float) -> Array:
    """Evaluate the Gauss-Weierstrass kernel (4πt)^{-n/2} exp(-|u|²/4t) over the last axis."""
    pts = np.asarray(u, dtype=float)
    dim = pts.shape[-1]
    return np.asarray(
        (4.0 * math.pi * t) ** (-0.5 * dim) * np.exp(-np.sum(pts * pts, axis=-1) / (4.0 * t)))


def gw_convolution_check(
    gamma_index: Sequence[int],
    s: float,
    t: float,
    v: ArrayLike,
    diagonal_term: bool = True,
) -> ClosedFormCheck:
    """
    Compare ∫ u^γ g_s(v-u) g_t(u) du with (t v/(s+t))^γ g_{s+t}(v).

    For γ = 2e_i the closed form gains 2st/(s+t) g_{s+t}(v); diagonal_term=False drops it.
    The integral is a trapezoid sum over a lattice centered on the product's peak.

    :param gamma_index: a multi-index with |γ| <= 2
    """
    vec = np.asarray(v, dtype=float)
    g = tuple(int(k) for k in gamma_index)
    if len(g) != len(vec) or sum(g) > 2 or min(g) < 0:
        raise ConfigError(f'need a multi-index of order at most 2 in R^{len(vec)}, got {g}',
                          'gamma')
    if not (s > 0.0 and t > 0.0):
        raise ConfigError(f'heat kernel times must be positive, got ({s}, {t})', 't')
    center = t * vec / (s + t)
    tau = s * t / (s + t)
    width = math.sqrt(2.0 * tau)
    axis = 0.25 * width * np.arange(-40, 41)
    grids = np.meshgrid(*([axis] * len(vec)), indexing='ij')
    u = center + np.stack(grids, axis=-1)
    mono = np.prod(u ** np.asarray(g), axis=-1)
    numeric = float(np.sum(mono * heat_kernel(vec - u, s) * heat_kernel(u, t))
                    * (0.25 * width) ** len(vec))
    peak = float(heat_kernel(vec, s + t))
    closed = float(np.prod(center ** np.asarray(g))) * peak
    if diagonal_term and sum(g) == 2 and max(g) == 2:
        closed += 2.0 * tau * peak
    return ClosedFormCheck(numeric=numeric, closed_form=closed)


def subordination_prefactor(alpha: float, dim: int) -> float:
    """Get π^{n/2} / (2^{α+1} Γ((n+α+1)/2))."""
    return math.pi ** (0.5 * dim) / (2.0 ** (alpha + 1.0) * gamma(0.5 * (dim + alpha + 1.0)))


def gw_subordination_check(alpha: float, u: ArrayLike) -> ClosedFormCheck:
    """
    Write |u|^{-n-α-1} as a superposition of heat kernels and integrate it back.

    The t-integral runs in τ = |u|²/(4t) over (0, ∞) with adaptive quadrature.
    """
    _check_order(alpha, 'alpha', 1.0)
    vec = np.asarray(u, dtype=float)
    dim = len(vec)
    r2 = float(vec @ vec)
    if r2 == 0.0:
        raise ConfigError('u must be nonzero', 'u')

    def integrand(tau: float) -> float:
        t = r2 / (4.0 * tau)
        return float(heat_kernel(vec, t)) * t ** (-0.5 * (alpha + 3.0)) * r2 / (4.0 * tau * tau)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return ClosedFormCheck(
        numeric=subordination_prefactor(alpha, dim) * float(value),
        closed_form=r2 ** (-0.5 * (dim + alpha + 1.0)),
    )


def frac_laplacian_set_bridge(
    scene: LevelSetScene,
    points: ArrayLike,
    sigma: float,
    spacing: float,
    half_width: float,
) -> Array:
    """
    Get H_σ(z) = (1/(ν_σ ω_{n-2})) (-Δ)^{σ/2} χ̃(z) on a cubic lattice centered at each z.

    χ̃ is the signed indicator (+1 inside) with its jump smoothed over one cell through the
    level-set distance. The enclosed region must fit in the lattice, which has half_width / h
    nodes on each side of z; outside it χ̃ = -1 is integrated in closed form.

    :param scene: a bounded level-set scene
    :param points: surface points, shape (m, n)
    :param sigma: the order σ in (0, 1)
    :param spacing: the lattice spacing h
    :param half_width: the lattice half-width
    :return: the curvature estimate at each point
    """
    _check_order(sigma, 'sigma', 1.0)
    if not 0.0 < spacing < half_width:
        raise ConfigError(
            f'need 0 < spacing < half_width, got ({spacing}, {half_width})', 'spacing')
    dim = scene.dim
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    count = int(math.ceil(half_width / spacing))
    axis = spacing * np.arange(-count, count + 1)
    offsets = np.stack(np.meshgrid(*([axis] * dim), indexing='ij'), axis=-1).reshape(-1, dim)
    r = np.linalg.norm(offsets, axis=1)
    width = half_width / STENCIL_REACH
    index = 0.5 * (dim + sigma) + 1.0
    kernel = np.where(r > 0.0, np.where(r > 0.0, r, 1.0) ** (-dim - sigma), 0.0)
    shift = 1.0 - ewald_cutoff(r, width, index)
    far = unit_sphere_measure(dim - 1) * _radial_cutoff_integral(
        -1.0 - sigma, width, index, upper=False)
    nu = nu_alpha(sigma, dim)
    omega = sphere_measure_constant(dim)
    values = np.empty(len(pts))
    for m, z in enumerate(pts):
        if not scene.on_surface(z):
            raise PointNotOnSurface(f'{list(z)} is not on {scene.name()}')
        y = z + offsets
        grad = np.linalg.norm(scene.gradient(y), axis=1)
        with np.errstate(over='ignore'):
            distance = scene.level(y) / np.maximum(grad, np.finfo(float).tiny)
            indicator = np.clip(-2.0 * distance / spacing, -1.0, 1.0)
        lap = nu * (float(np.sum((indicator + shift) * kernel)) * spacing ** dim - far)
        values[m] = lap / (nu * omega)
    logger.verbose_print(
        f'set bridge: {len(offsets)} nodes per point, h={spacing:g}, half-width {half_width:g}')
    return values
