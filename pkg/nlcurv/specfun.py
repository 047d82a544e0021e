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

"""Gamma and beta functions and the normalization constants built on them."""

import math

from scipy import integrate
from scipy import special

from .errors import SpecialFunctionError


# Above this argument sum the gamma quotient overflows
BETA_QUOTIENT_LIMIT = 170.0


def _is_pole(x: float) -> bool:
    return x <= 0.0 and float(x).is_integer()


def gamma(x: float) -> float:
    """
    Evaluate the gamma function for a real argument.

    Negative arguments are brought to (0, 1] with the recurrence Γ(x) = Γ(x+1)/x.

    :param x: the argument, not a non-positive integer
    :return: Γ(x)
    """
    if _is_pole(x):
        raise SpecialFunctionError(f'gamma has a pole at {x}')
    divisor = 1.0
    while x <= 0.0:
        divisor *= x
        x += 1.0
    return float(special.gamma(x)) / divisor


def beta(x: float, y: float) -> float:
    """
    Evaluate the beta function through the gamma quotient B(x,y) = Γ(x)Γ(y)/Γ(x+y).

    :param x: first argument, > 0
    :param y: second argument, > 0
    :return: B(x, y)
    """
    if x <= 0.0 or y <= 0.0:
        raise SpecialFunctionError(f'beta is defined for positive arguments, got ({x}, {y})')
    if x + y >= BETA_QUOTIENT_LIMIT:
        return float(special.beta(x, y))
    return gamma(x) * gamma(y) / gamma(x + y)


def beta_numeric(x: float, y: float, form: str = 't') -> float:
    """
    Evaluate the beta function by adaptive quadrature of one of its integral forms.

    The endpoint singularities are passed to QUADPACK as algebraic weights.

    :param x: first argument, > 0
    :param y: second argument, > 0
    :param form: 't' for the integral of t^{x-1}(1-t)^{y-1} over (0,1),
        'trig' for twice the integral of sin^{2x-1}cos^{2y-1} over (0,π/2)
    :return: B(x, y)
    """
    if x <= 0.0 or y <= 0.0:
        raise SpecialFunctionError(f'beta is defined for positive arguments, got ({x}, {y})')
    if form == 't':
        value, _ = integrate.quad(
            lambda t: 1.0, 0.0, 1.0, weight='alg', wvar=(x - 1.0, y - 1.0),
            epsabs=0.0, epsrel=1e-13, limit=200,
        )
        return float(value)
    if form == 'trig':
        half_pi = 0.5 * math.pi

        def smooth_part(theta: float) -> float:
            sinc = math.sin(theta) / theta if theta > 0.0 else 1.0
            rest = half_pi - theta
            cosc = math.cos(theta) / rest if rest > 0.0 else 1.0
            return float(sinc ** (2.0 * x - 1.0) * cosc ** (2.0 * y - 1.0))

        value, _ = integrate.quad(
            smooth_part, 0.0, half_pi, weight='alg', wvar=(2.0 * x - 1.0, 2.0 * y - 1.0),
            epsabs=0.0, epsrel=1e-13, limit=200,
        )
        return 2.0 * float(value)
    raise ValueError(f"unknown beta integral form '{form}'")


def unit_ball_volume(m: int) -> float:
    """Get the volume of the unit ball in R^m."""
    return math.pi ** (0.5 * m) / gamma(0.5 * m + 1.0)


def unit_sphere_measure(m: int) -> float:
    """Get the m-dimensional measure of the unit sphere in R^(m+1)."""
    return 2.0 * math.pi ** (0.5 * (m + 1)) / gamma(0.5 * (m + 1))


def ball_volume_constant(n: int) -> float:
    """
    Get α_{n-1}, the volume of the unit ball in R^(n-1).

    :param n: the ambient dimension, >= 2
    """
    return unit_ball_volume(n - 1)


def sphere_measure_constant(n: int) -> float:
    """
    Get ω_{n-2}, the measure of the unit sphere in R^(n-1).

    It equals (n-1)·α_{n-1}; for n = 2 the sphere is two points and ω_0 = 2.

    :param n: the ambient dimension, >= 2
    """
    return unit_sphere_measure(n - 2)


def mu_alpha(alpha: float, n: int) -> float:
    """
    Get the normalization of the fractional gradient and divergence of order alpha.

    μ_α = 2^α Γ((n+α+1)/2) / (π^{n/2} Γ((1-α)/2)), strictly positive on [0, 1).

    :param alpha: the order, in [0, 1)
    :param n: the dimension
    """
    if not 0.0 <= alpha < 1.0:
        raise SpecialFunctionError(f'mu_alpha needs alpha in [0, 1), got {alpha}')
    return (
        2.0 ** alpha * gamma(0.5 * (n + alpha + 1.0))
        / (math.pi ** (0.5 * n) * gamma(0.5 * (1.0 - alpha)))
    )


def nu_alpha(alpha: float, n: int) -> float:
    """
    Get the normalization of the fractional Laplacian of order alpha.

    ν_α = 2^α Γ((n+α)/2) / (π^{n/2} Γ(-α/2)); negative for alpha in (0, 2).

    :param alpha: the order, in (0, 2)
    :param n: the dimension
    """
    if not 0.0 < alpha < 2.0:
        raise SpecialFunctionError(f'nu_alpha needs alpha in (0, 2), got {alpha}')
    return (
        2.0 ** alpha * gamma(0.5 * (n + alpha))
        / (math.pi ** (0.5 * n) * gamma(-0.5 * alpha))
    )
