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

"""Ordered task execution on a thread pool."""

import concurrent.futures
from typing import Callable
from typing import List
from typing import Sequence
from typing import TypeVar


T = TypeVar('T')
R = TypeVar('R')


def run_tasks(fn: Callable[[T], R], tasks: Sequence[T], threads: int = 1) -> List[R]:
    """
    Apply a function to every task, possibly in parallel.

    :param fn: the function to apply
    :param tasks: the task arguments
    :param threads: the maximum number of worker threads; 1 runs sequentially
    :return: the results, in task order regardless of completion order
    """
    if threads <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, tasks))
