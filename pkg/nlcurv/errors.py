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

"""Exceptions and warnings raised by nlcurv."""

from typing import Optional


EXIT_OK = 0
EXIT_NUMERICAL_FAILURE = 1
EXIT_CONFIG_ERROR = 2


class NlcurvError(Exception):
    """Base class for all nlcurv errors."""

    exit_code = EXIT_NUMERICAL_FAILURE


class ConfigError(NlcurvError):
    """Invalid configuration, flag, or input file."""

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, field: Optional[str] = None) -> None:
        """Create a ConfigError, optionally pointing at the offending field."""
        if field:
            message = f'{field}: {message}'
        super().__init__(message)
        self.field = field


class SceneError(ConfigError):
    """Invalid scene parameters or mesh."""


class NumericalError(NlcurvError):
    """A computation could not produce a trustworthy value."""


class SpecialFunctionError(NumericalError):
    """Pole or domain error of a special function."""


class TangencyDetected(NumericalError):
    """A ray touches the surface tangentially or hits a mesh edge."""


class EndpointOnSurface(NumericalError):
    """A segment endpoint lies on the surface."""


class PointNotOnSurface(NumericalError):
    """A point expected on the surface is not on it."""


class DegenerateProjection(NumericalError):
    """A point lies on the normal line, so its tangent direction is undefined."""


class CancellationFailure(NumericalError):
    """The near-origin divergent terms of a principal value did not cancel."""


class NearSingularityUnresolved(NumericalError):
    """Adaptive refinement near the singular point hit its depth limit."""


class RepresentationUnavailable(NumericalError):
    """The requested tensor representation does not apply to this scene."""


class NonConvergent(NumericalError):
    """Successive extrapolants disagree."""


class UnsupportedDecay(NumericalError):
    """The field decay class cannot be handled by the lattice operators."""


class QuadBudgetExceeded(NumericalError):
    """Numerical integration did not converge within its node budget."""


class PeriodizationError(NumericalError):
    """A field is too large at the box boundary to be treated as periodic."""


class TruncationWarning(UserWarning):
    """The truncated tail of an integral is not negligible."""
