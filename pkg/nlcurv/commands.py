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

"""Subcommand drivers: sweeps, tables, and their CSV/JSON output."""

from contextlib import contextmanager
import csv
from dataclasses import dataclass
import datetime
from functools import partial
import json
import sys
from typing import Any
from typing import Callable
from typing import Dict
from typing import Iterator
from typing import List
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple
import warnings

import numpy as np

from .config import RunConfig
from .curvature import curvature_report
from .curvature import CurvatureReport
from .curvature import sigma_to_one_limit
from .errors import ConfigError
from .errors import EXIT_NUMERICAL_FAILURE
from .errors import EXIT_OK
from .errors import NlcurvError
from .errors import TruncationWarning
from .fieldio import gaussian_field
from .fieldio import gaussian_vector_field
from .fieldio import GridField
from .fieldio import read_field
from .fieldio import write_csv_slice
from .fieldio import write_field
from .fracops import frac_divergence
from .fracops import frac_gradient
from .fracops import frac_hessian_direct
from .fracops import frac_laplacian
from .fracops import l2_relative
from .logger import logger
from .oracle import SphereOracle
from .oracle import spectral_frac_op
from .perimeter import Ball
from .perimeter import CrossingParity
from .perimeter import Estimate
from .perimeter import sigma_area
from .perimeter import sigma_perimeter
from .surface import Array
from .tasks import run_tasks
from .verify import run_suite


FRACOPS_OPERATORS = ('gradient', 'divergence', 'laplacian', 'hessian', 'composition')
VECTOR_CENTER_SHIFT = 0.25

Row = Dict[str, Any]


def format_value(value: Any) -> str:
    """Format a CSV cell; floats keep all 17 significant digits."""
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ' '.join(format_value(v) for v in value)
    return str(value)


def table_header(version: str, reproducible: bool) -> Optional[str]:
    """Get the comment line written above every table, or None when reproducible."""
    if reproducible:
        return None
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec='seconds')
    return f'# nlcurv {version} {stamp}'


@contextmanager
def _output(path: Optional[str]) -> Iterator[Any]:
    if not path or path == '-':
        yield sys.stdout
        return
    try:
        f = open(path, 'w', newline='')
    except OSError as e:
        raise ConfigError(f"cannot write '{path}': {e.strerror}", 'outputs')
    with f:
        yield f


def write_table(
    columns: Sequence[str],
    rows: Sequence[Row],
    path: Optional[str] = None,
    header: Optional[str] = None,
) -> None:
    """
    Write rows as CSV.

    :param columns: the column names, in order
    :param rows: the rows; missing cells are left empty
    :param path: the output file, stdout when None or '-'
    :param header: a comment line written first, if any
    """
    with _output(path) as f:
        if header:
            f.write(header + '\n')
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])


def write_json(data: Any, path: Optional[str] = None) -> None:
    """Write JSON with sorted keys, to stdout when path is None or '-'."""
    with _output(path) as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


@contextmanager
def echo_warnings() -> Iterator[None]:
    """Collect truncation warnings and print each distinct one once."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', TruncationWarning)
        yield
    seen: Set[str] = set()
    for w in caught:
        message = str(w.message)
        if message not in seen:
            seen.add(message)
            logger.print(f'warning: {message}')


def _error_status(error: NlcurvError) -> str:
    return f'{type(error).__name__}: {error}'


@dataclass
class PointResult:
    """The outcome of one (point, σ) task."""

    index: int
    z: Array
    sigma: float
    report: Optional[CurvatureReport] = None
    status: str = 'ok'


def _tensor_columns(n: int, representations: Sequence[str]) -> List[str]:
    columns: List[str] = []
    for rep in representations:
        columns.extend(f'L_{rep}_{i}{j}' for i in range(n - 1) for j in range(n - 1))
        columns.extend(f'eig_{rep}_{i}' for i in range(n - 1))
    return columns


def _tensor_cells(rep: str, matrix: Array) -> Row:
    m = np.asarray(matrix, dtype=float)
    cells: Row = {}
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            cells[f'L_{rep}_{i}{j}'] = float(m[i, j])
    for i, value in enumerate(np.linalg.eigvalsh(0.5 * (m + m.T))):
        cells[f'eig_{rep}_{i}'] = float(value)
    return cells


def _curvature_rows(scene_name: str, n: int, result: PointResult) -> List[Row]:
    base: Row = {'scene': scene_name, 'n': n, 'point': result.z, 'sigma': result.sigma}
    report = result.report
    if report is None:
        return [{**base, 'kind': 'point', 'status': result.status}]
    shared: Row = {
        **base,
        'H_vol': report.h_volume,
        'H_avg': report.h_average,
        'K_sigma': report.k_sigma,
        'tail_bound': report.diagnostics.get('tail_bound'),
        'cancel_residual': report.diagnostics.get('cancel_residual'),
        'status': result.status,
    }
    for rep, tensor in report.tensors.items():
        shared.update(_tensor_cells(rep, tensor.matrix))
    return [
        {**shared, 'kind': 'direction', 'direction_index': i, 'k_sigma_e': float(k)}
        for i, k in enumerate(report.k_samples)
    ]


def _limit_row(scene_name: str, n: int, results: Sequence[PointResult]) -> Row:
    """Extrapolate (1-σ)·quantity to σ → 1 over the results of one point."""
    row: Row = {
        'kind': 'limit', 'scene': scene_name, 'n': n, 'point': results[0].z, 'sigma': 1.0,
        'direction_index': 0,
    }
    reports = [r.report for r in results if r.report is not None]
    if len(reports) != len(results):
        row['status'] = 'skipped: an order failed'
        return row
    try:
        row['k_sigma_e'] = float(sigma_to_one_limit(
            {r.sigma: float(r.k_samples[0]) for r in reports}, 'k').value)
        row['H_avg'] = float(sigma_to_one_limit(
            {r.sigma: float(r.h_average or 0.0) for r in reports}, 'H').value)
        row['H_vol'] = float(sigma_to_one_limit(
            {r.sigma: float(r.h_volume or 0.0) for r in reports}, 'H').value)
        tensor = sigma_to_one_limit({r.sigma: r.tensors['angular'] for r in reports}, 'L')
        row.update(_tensor_cells('angular', tensor.value))
        row['status'] = 'ok'
    except ConfigError:
        raise
    except NlcurvError as e:
        row['status'] = _error_status(e)
    return row


def _report_dict(result: PointResult) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        'point': [float(c) for c in result.z],
        'sigma': result.sigma,
        'status': result.status,
    }
    report = result.report
    if report is not None:
        data.update({
            'k_samples': [float(k) for k in report.k_samples],
            'h_volume': report.h_volume,
            'h_average': report.h_average,
            'h_surface': report.h_surface,
            'k_sigma': report.k_sigma,
            'k_double_integral': report.k_double_integral,
            'trace_residual': report.trace_residual,
            'tensors': {rep: t.matrix.tolist() for rep, t in report.tensors.items()},
            'diagnostics': {k: float(v) for k, v in report.diagnostics.items()},
        })
    return data


def cmd_curvature(config: RunConfig, threads: int = 1, header: Optional[str] = None) -> int:
    """
    Compute every curvature quantity at each configured point and order.

    Failures at one (point, σ) are recorded in the status column and the sweep continues.

    :return: 0, or 1 if any task failed
    """
    scene = config.build_scene()
    spec = config.quadrature_spec()
    points = config.resolve_points(scene)
    tasks = [(i, z, s) for i, z in enumerate(points) for s in config.sigmas]
    logger.verbose_print(f'{len(tasks)} curvature tasks on {scene.name()}')

    def one(task: Tuple[int, Array, float]) -> PointResult:
        index, z, sigma = task
        result = PointResult(index=index, z=z, sigma=sigma)
        try:
            result.report = curvature_report(scene, z, sigma, spec, config.representations)
        except ConfigError:
            raise
        except NlcurvError as e:
            logger.print(f'point {index} sigma {sigma}: {e}')
            result.status = _error_status(e)
        return result

    with echo_warnings():
        results = run_tasks(one, tasks, threads)

    n = scene.dim
    rows: List[Row] = []
    for result in results:
        rows.extend(_curvature_rows(scene.name(), n, result))
    if config.extrapolate:
        for index in range(len(points)):
            rows.append(_limit_row(scene.name(), n, [r for r in results if r.index == index]))
    reps = ['angular'] + [r for r in config.representations if r != 'angular']
    columns = (
        ['kind', 'scene', 'n', 'point', 'sigma', 'direction_index', 'k_sigma_e', 'H_vol', 'H_avg']
        + _tensor_columns(n, reps)
        + ['K_sigma', 'tail_bound', 'cancel_residual', 'status']
    )
    write_table(columns, rows, config.outputs.get('csv'), header)
    if 'json' in config.outputs:
        write_json([_report_dict(r) for r in results], config.outputs['json'])
    failed = any(row.get('status') != 'ok' for row in rows)
    return EXIT_NUMERICAL_FAILURE if failed else EXIT_OK


def cmd_perimeter(
    config: RunConfig,
    omega_radius: Optional[float] = None,
    threads: int = 1,
    header: Optional[str] = None,
) -> int:
    """
    Estimate the σ-area of the scene relative to a ball Ω, and its σ-perimeter if it is closed.

    :param omega_radius: the radius of Ω about the scene center, twice the scene's bounding
        radius by default
    """
    scene = config.build_scene()
    spec = config.quadrature_spec()
    ball = scene.bounding_ball()
    if ball is None:
        raise ConfigError(f'scene {scene.name()} is unbounded', 'scene')
    center, radius = ball
    omega_r = 2.0 * radius if omega_radius is None else omega_radius
    if not omega_r > 0.0:
        raise ConfigError(f'must be positive, got {omega_r}', 'omega_radius')
    omega = Ball(center, omega_r)
    rows: List[Row] = []
    with echo_warnings():
        for sigma in config.sigmas:
            quantities: List[Tuple[str, Callable[[], Estimate]]] = [
                ('area', partial(sigma_area, scene, omega, sigma, spec, threads=threads)),
            ]
            if scene.closed:
                quantities.append(('perimeter', partial(
                    sigma_perimeter, CrossingParity(scene), omega, sigma, spec,
                    threads=threads)))
            for quantity, estimate in quantities:
                row: Row = {
                    'scene': scene.name(), 'n': scene.dim, 'sigma': sigma,
                    'omega_radius': omega_r, 'quantity': quantity,
                }
                try:
                    e = estimate()
                except ConfigError:
                    raise
                except NlcurvError as error:
                    row['status'] = _error_status(error)
                else:
                    row.update(value=e.value, std_error=e.std_error, samples=e.samples,
                               status='ok')
                rows.append(row)
    columns = ['scene', 'n', 'sigma', 'omega_radius', 'quantity', 'value', 'std_error',
               'samples', 'status']
    write_table(columns, rows, config.outputs.get('csv'), header)
    failed = any(row['status'] != 'ok' for row in rows)
    return EXIT_NUMERICAL_FAILURE if failed else EXIT_OK


@dataclass(frozen=True)
class FracopsRequest:
    """A fractional operator to apply and the field to apply it to."""

    operator: str = 'laplacian'
    alpha: float = 0.5
    beta: float = 0.5
    dim: int = 2
    length: float = 16.0
    count: int = 128
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    slice_path: Optional[str] = None

    def __post_init__(self) -> None:
        """Validate the operator name."""
        if self.operator not in FRACOPS_OPERATORS:
            raise ConfigError(
                f"unknown operator '{self.operator}', "
                f"expected one of {', '.join(FRACOPS_OPERATORS)}",
                'operator')

    def input_field(self) -> GridField:
        """
        Load the input field, or sample the built-in one.

        The built-in field is exp(-π|x|²), or for the divergence a vector field whose
        components are Gaussians shifted along their own axis.
        """
        if self.input_path:
            return read_field(self.input_path)
        if self.operator == 'divergence':
            return gaussian_vector_field(
                self.dim, self.length, self.count, VECTOR_CENTER_SHIFT * np.eye(self.dim))
        return gaussian_field(self.dim, self.length, self.count)


def _apply_fracop(request: FracopsRequest, field: GridField) -> Tuple[GridField, Row]:
    """Apply the operator and compare it with an independent discretization."""
    op, alpha, beta = request.operator, request.alpha, request.beta
    stats: Row = {}
    periodizable = field.decay.kind != 'algebraic'
    if op == 'gradient':
        out = frac_gradient(field, alpha)
        if periodizable:
            stats['oracle_l2'] = l2_relative(out, spectral_frac_op(field, 'gradient', alpha))
    elif op == 'divergence':
        out = frac_divergence(field, alpha)
        if periodizable:
            stats['oracle_l2'] = l2_relative(out, spectral_frac_op(field, 'divergence', alpha))
    elif op == 'laplacian':
        out = frac_laplacian(field, alpha)
        if periodizable:
            stats['oracle_l2'] = l2_relative(out, spectral_frac_op(field, 'laplacian', alpha))
    elif op == 'hessian':
        out = frac_hessian_direct(field, alpha, beta)
        stats['nested_l2'] = l2_relative(frac_gradient(frac_gradient(field, beta), alpha), out)
    else:
        composed = frac_divergence(frac_gradient(field, beta), alpha)
        lap = frac_laplacian(field, alpha + beta)
        out = composed
        stats['identity_l2'] = l2_relative(composed, lap.with_values(-lap.values))
    return out, stats


def cmd_fracops(request: FracopsRequest, header: Optional[str] = None) -> int:
    """
    Apply a fractional operator to a field, write the result, and report comparison stats.

    :return: 0, or 1 on a numerical failure
    """
    field = request.input_field()
    row: Row = {
        'operator': request.operator, 'alpha': request.alpha, 'beta': request.beta,
        'n': field.dim, 'count': field.count, 'spacing': field.spacing,
    }
    try:
        with echo_warnings():
            out, stats = _apply_fracop(request, field)
    except ConfigError:
        raise
    except NlcurvError as e:
        row['status'] = _error_status(e)
    else:
        row.update(stats)
        row.update(tail_bound=out.tail_bound, peak=float(np.max(np.abs(out.values))),
                   status='ok')
        if request.output_path:
            write_field(request.output_path, out)
        if request.slice_path:
            write_csv_slice(request.slice_path, out)
    columns = ['operator', 'alpha', 'beta', 'n', 'count', 'spacing', 'peak', 'tail_bound',
               'oracle_l2', 'nested_l2', 'identity_l2', 'status']
    write_table(columns, [row], None, header)
    return EXIT_OK if row['status'] == 'ok' else EXIT_NUMERICAL_FAILURE


def cmd_verify(suites: Sequence[str], json_path: Optional[str] = None, threads: int = 1) -> int:
    """
    Run acceptance suites and write the JSON verdict.

    :return: 0 if every suite passed, 1 otherwise
    """
    reports = []
    for name in suites:
        report = run_suite(name, threads)
        failures = report.failures()
        if failures:
            logger.print(f"{name}: FAILED ({', '.join(failures)})")
        else:
            logger.print(f'{name}: passed ({len(report.checks)} checks)')
        reports.append(report)
    passed = all(r.passed for r in reports)
    write_json({'passed': passed, 'suites': [r.to_dict() for r in reports]}, json_path)
    return EXIT_OK if passed else EXIT_NUMERICAL_FAILURE


def cmd_sphere_table(
    dims: Sequence[int],
    radii: Sequence[float],
    sigmas: Sequence[float],
    path: Optional[str] = None,
    header: Optional[str] = None,
) -> int:
    """Tabulate the closed-form sphere curvatures over every (n, ρ, σ)."""
    rows: List[Row] = []
    for n in dims:
        for radius in radii:
            for sigma in sigmas:
                oracle = SphereOracle(n, radius, sigma)
                rows.append({
                    'n': n, 'radius': radius, 'sigma': sigma,
                    'k_sigma': oracle.k(), 'H_sigma': oracle.k(), 'K_sigma': oracle.gaussian(),
                    'scaled_k': (1.0 - sigma) * oracle.k(), 'classical_k': oracle.classical_k(),
                })
    columns = ['n', 'radius', 'sigma', 'k_sigma', 'H_sigma', 'K_sigma', 'scaled_k',
               'classical_k']
    write_table(columns, rows, path, header)
    return EXIT_OK


def parse_floats(text: str, name: str) -> List[float]:
    """
    Parse a comma-separated list of numbers.

    :raises ConfigError: on malformed entries, naming the option
    """
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got '{text}'", name)

