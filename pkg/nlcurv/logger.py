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

"""Quiet/verbose logger shared by the library and the command line."""

import sys
from typing import Any
from typing import Protocol


class VerbosityOptions(Protocol):
    """Anything carrying quiet and verbose flags."""

    quiet: bool
    verbose: bool


class Logger:
    """Simple logger to stderr which can be quiet or verbose."""

    def __init__(self, quiet: bool = False, verbose: bool = False) -> None:
        """Create a logger, neither quiet nor verbose by default."""
        self.__quiet = quiet
        self.__verbose = verbose

    def set_options(self, options: VerbosityOptions) -> None:
        """Set options using options object."""
        self.__quiet = options.quiet
        self.__verbose = options.verbose

    def print(self, msg: str = '', *args: Any, **kwargs: Any) -> None:  # noqa: A003
        """Print if not quiet."""
        if not self.__quiet:
            print(msg, *args, file=sys.stderr, **kwargs)

    def verbose_print(self, msg: str = '', *args: Any, **kwargs: Any) -> None:
        """Print if verbose."""
        if self.__verbose:
            print(msg, *args, file=sys.stderr, **kwargs)


logger = Logger()
