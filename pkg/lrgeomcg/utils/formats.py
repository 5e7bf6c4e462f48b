"""
File formats for lrgeomcg
Sample triplet files, trace and summary CSVs, and factor archives
"""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from lrgeomcg.exceptions import FormatError
from lrgeomcg.services.cg_solver import SolverTrace
from lrgeomcg.services.manifold import FixedRankMatrix
from lrgeomcg.services.problems import GroundTruth
from lrgeomcg.services.sampling import SamplingSet

# Configure logging
logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRACE_COLUMNS = ['iter', 'cost', 'grad_norm', 'rel_residual', 'beta', 'alpha', 'step',
                 'backtracks', 'sigma_max', 'sigma_min', 'wall_ns']


def format_value(value: Any) -> str:
    """Canonical CSV text: shortest round-trip repr for floats, empty for None"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        return repr(value)
    return str(value)


def write_samples(path: PathLike, omega: SamplingSet):
    """
    Write ``m n nnz`` then one ``i j value`` line per entry, 1-based,
    lexicographically sorted, values with 17 significant digits.
    """
    values = omega.require_values()
    with open(path, 'w') as f:
        f.write(f'{omega.m} {omega.n} {len(omega)}\n')
        for i, j, v in zip(omega.rows.tolist(), omega.cols.tolist(), values.tolist()):
            f.write(f'{i + 1} {j + 1} {v:.17g}\n')
    logger.info(f"Wrote {len(omega)} samples to {path}")


def read_samples(path: PathLike) -> SamplingSet:
    """Parse a sample file; lines starting with '%' or '#' are comments"""
    header: Optional[Tuple[int, int, int]] = None
    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line[0] in '%#':
                continue
            parts = line.split()
            try:
                if header is None:
                    if len(parts) != 3:
                        raise ValueError('header needs m n nnz')
                    header = (int(parts[0]), int(parts[1]), int(parts[2]))
                    continue
                if len(parts) != 3:
                    raise ValueError('expected i j value')
                rows.append(int(parts[0]) - 1)
                cols.append(int(parts[1]) - 1)
                values.append(float(parts[2]))
            except ValueError as e:
                raise FormatError(f'{path}:{lineno}: {e}') from e
    if header is None:
        raise FormatError(f'{path}: missing header line')
    m, n, nnz = header
    if nnz != len(values):
        raise FormatError(f'{path}: header announces {nnz} entries, found {len(values)}')
    try:
        return SamplingSet.from_triplets(m, n, rows, cols, values)
    except ValueError as e:
        raise FormatError(f'{path}: {e}') from e


def trace_rows(trace: SolverTrace, record_timing: bool = False) -> List[List[str]]:
    """CG records of a trace as fixed-column CSV rows"""
    rows = []
    for r in trace.cg_records():
        rows.append([
            str(r.iteration), format_value(r.cost), format_value(r.grad_norm),
            format_value(r.rel_residual), format_value(r.beta), format_value(r.alpha),
            format_value(r.step), str(r.backtracks), format_value(r.sigma_max),
            format_value(r.sigma_min), str(r.wall_ns if record_timing else 0),
        ])
    return rows


def write_trace(path: PathLike, trace: SolverTrace, record_timing: bool = False):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(trace_rows(trace, record_timing))


def read_trace(path: PathLike) -> List[Dict[str, float]]:
    """Parse a trace CSV into one mapping per iteration"""
    with open(path, newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TRACE_COLUMNS:
            raise FormatError(f'{path}: unexpected trace columns {reader.fieldnames}')
        try:
            return [
                {key: (int(value) if key in ('iter', 'backtracks', 'wall_ns') else float(value))
                 for key, value in row.items()}
                for row in reader
            ]
        except (TypeError, ValueError) as e:
            raise FormatError(f'{path}: {e}') from e


def residuals_from_trace(rows: Iterable[Dict[str, float]]) -> Dict[int, float]:
    return {int(row['iter']): row['rel_residual'] for row in rows}


def write_summary(path: PathLike, rows: Sequence[Dict[str, Any]], columns: Sequence[str]):
    """Write summary rows with a fixed column order"""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])
    logger.info(f"Wrote {len(rows)} summary rows to {path}")


def save_factors(path: PathLike, X: FixedRankMatrix):
    np.savez(path, U=X.U, sigma=X.sigma, V=X.V)


def load_factors(path: PathLike, omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    try:
        with np.load(path) as data:
            return FixedRankMatrix(data['U'], data['sigma'], data['V'], omega)
    except (KeyError, OSError) as e:
        raise FormatError(f'{path}: not a factor archive ({e})') from e


def save_ground_truth(path: PathLike, truth: GroundTruth):
    if truth.is_factored:
        np.savez(path, L=truth.L, R=truth.R)
    else:
        np.savez(path, A=truth.to_dense())


def load_ground_truth(path: PathLike) -> GroundTruth:
    try:
        with np.load(path) as data:
            if 'L' in data.files:
                return GroundTruth.from_factors(data['L'], data['R'])
            return GroundTruth.from_dense(data['A'])
    except (KeyError, OSError) as e:
        raise FormatError(f'{path}: not a ground-truth archive ({e})') from e
