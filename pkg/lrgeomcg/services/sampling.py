"""
Sampling Service
Index set Omega, observed values and the sparse kernels that apply P_Omega
to low-rank products
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy import sparse

from lrgeomcg.config import Config
from lrgeomcg.exceptions import ArgumentError, InsufficientSamplingError

if TYPE_CHECKING:
    from lrgeomcg.services.manifold import FixedRankMatrix

# Configure logging
logger = logging.getLogger(__name__)

# Entries gathered per block in apply_proj_omega_lowrank; bounds the
# temporary (block, r) arrays.
GATHER_BLOCK = 1 << 16


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class SamplingSet:
    """
    Index set Omega of an m x n matrix with optional values on it.

    Entries are 0-based, unique and sorted lexicographically by (row, col).
    The same type holds the observed data A_Omega, the residual X_Omega - A_Omega
    and any other sparse matrix supported on Omega. An index-only set has
    ``values is None``.
    """
    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: Optional[np.ndarray] = None
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ArgumentError(f'Matrix dimensions must be positive, got {self.m}x{self.n}')
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ArgumentError('Row and column index arrays must be 1-D and of equal length')
        if not self._checked and rows.size:
            if rows.min() < 0 or rows.max() >= self.m or cols.min() < 0 or cols.max() >= self.n:
                raise ArgumentError(f'Index out of range for a {self.m}x{self.n} matrix')
            linear = rows * self.n + cols
            if np.any(np.diff(linear) <= 0):
                raise ArgumentError('Entries must be unique and sorted lexicographically; use SamplingSet.from_triplets')
        object.__setattr__(self, 'rows', _readonly(rows))
        object.__setattr__(self, 'cols', _readonly(cols))
        if self.values is not None:
            values = np.ascontiguousarray(self.values, dtype=np.float64)
            if values.shape != rows.shape:
                raise ArgumentError(f'Expected {rows.size} values, got {values.shape}')
            object.__setattr__(self, 'values', _readonly(values))

    @classmethod
    def from_triplets(cls, m: int, n: int, rows, cols, values=None) -> 'SamplingSet':
        """Build a set from unordered triplets; sorts them and rejects duplicates"""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise ArgumentError('Row and column index arrays must have equal length')
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise ArgumentError(f'Index out of range for a {m}x{n} matrix')
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        linear = rows * n + cols
        if np.any(np.diff(linear) == 0):
            raise ArgumentError('Duplicate (i, j) entries in sampling set')
        if values is not None:
            values = np.asarray(values, dtype=np.float64)[order]
        return cls(m, n, rows, cols, values, _checked=True)

    @classmethod
    def from_linear(cls, m: int, n: int, linear: np.ndarray, values=None) -> 'SamplingSet':
        """Build an index set from sorted, unique linear indices i*n + j"""
        linear = np.asarray(linear, dtype=np.int64)
        rows, cols = np.divmod(linear, n)
        return cls(m, n, rows, cols, values)

    def __len__(self) -> int:
        return int(self.rows.size)

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def has_values(self) -> bool:
        return self.values is not None

    def with_values(self, values) -> 'SamplingSet':
        """Same index set carrying new values"""
        return SamplingSet(self.m, self.n, self.rows, self.cols, values, _checked=True)

    def index_only(self) -> 'SamplingSet':
        return SamplingSet(self.m, self.n, self.rows, self.cols, None, _checked=True)

    def same_indices(self, other: 'SamplingSet') -> bool:
        if self.shape != other.shape or len(self) != len(other):
            return False
        if self.rows is other.rows and self.cols is other.cols:
            return True
        return bool(np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols))

    def require_values(self) -> np.ndarray:
        if self.values is None:
            raise ArgumentError('Sampling set carries no values')
        return self.values

    def norm(self) -> float:
        """Frobenius norm of the values, reduced in canonical order"""
        values = self.require_values()
        return float(np.sqrt(np.dot(values, values)))

    def inner(self, other: 'SamplingSet') -> float:
        if not self.same_indices(other):
            raise ArgumentError('Inner product needs identical index sets')
        return float(np.dot(self.require_values(), other.require_values()))

    def row_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.m)

    def col_counts(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n)

    def is_covering(self) -> bool:
        """True when every row and every column holds at least one entry"""
        return bool(self.row_counts().all() and self.col_counts().all())

    def gather(self, dense: np.ndarray) -> np.ndarray:
        """Values of a dense m x n matrix at the indices of the set"""
        dense = np.asarray(dense)
        if dense.shape != self.shape:
            raise ArgumentError(f'Dense matrix shape {dense.shape} does not match {self.shape}')
        return dense[self.rows, self.cols]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.rows, self.cols] = self.require_values()
        return dense

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        """Values as a CSR matrix; entries are already in row-major order"""
        values = self.require_values()
        indptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(self.row_counts(), out=indptr[1:])
        return sparse.csr_matrix((values, self.cols, indptr), shape=self.shape)


def sample_uniform(m: int, n: int, size: int, seed, retries: Optional[int] = None,
                   require_coverage: bool = True) -> SamplingSet:
    """
    Draw ``size`` distinct indices uniformly at random without replacement.

    When ``require_coverage`` is set, draws that leave a row or column empty
    are rejected and redrawn, at most ``retries`` times.

    Raises:
        ArgumentError: size out of range
        InsufficientSamplingError: coverage not reached within the retry budget
    """
    if m < 1 or n < 1:
        raise ArgumentError(f'Matrix dimensions must be positive, got {m}x{n}')
    total = m * n
    if size < 0 or size > total:
        raise ArgumentError(f'Sample size {size} outside [0, {total}]')
    if require_coverage and (size < m or size < n):
        raise ArgumentError(f'Sample size {size} cannot cover {m} rows and {n} columns')
    if retries is None:
        retries = Config.SAMPLING_RETRIES

    rng = np.random.default_rng(seed)
    for attempt in range(retries + 1):
        linear = np.sort(rng.choice(total, size=size, replace=False, shuffle=False))
        omega = SamplingSet.from_linear(m, n, linear)
        if not require_coverage or omega.is_covering():
            if attempt:
                logger.debug(f"Coverage reached after {attempt} redraws")
            return omega

    logger.warning(f"Insufficient sampling: {size} entries of a {m}x{n} matrix left rows/columns empty")
    raise InsufficientSamplingError(
        f'No covering sample of size {size} for a {m}x{n} matrix after {retries} retries'
    )


def apply_proj_omega_lowrank(Y1: np.ndarray, Y2: np.ndarray, omega: SamplingSet) -> np.ndarray:
    """Values of Y1 @ Y2.T at the entries of omega, in O(|Omega| r)"""
    Y1 = np.asarray(Y1, dtype=np.float64)
    Y2 = np.asarray(Y2, dtype=np.float64)
    if Y1.ndim != 2 or Y2.ndim != 2:
        raise ArgumentError('Factors must be 2-D arrays')
    if Y1.shape[0] != omega.m or Y2.shape[0] != omega.n or Y1.shape[1] != Y2.shape[1]:
        raise ArgumentError(
            f'Factor shapes {Y1.shape} and {Y2.shape} do not match a {omega.m}x{omega.n} set'
        )

    out = np.empty(len(omega))
    for start in range(0, len(omega), GATHER_BLOCK):
        block = slice(start, start + GATHER_BLOCK)
        out[block] = np.einsum('ij,ij->i', Y1[omega.rows[block]], Y2[omega.cols[block]])
    return out


def residual_on_omega(X: 'FixedRankMatrix', A_omega: SamplingSet) -> SamplingSet:
    """Sparse residual X_Omega - A_Omega on the index set of A_Omega"""
    if X.shape != A_omega.shape:
        raise ArgumentError(f'Iterate shape {X.shape} does not match data shape {A_omega.shape}')
    X_omega = X.omega_values_for(A_omega)
    return A_omega.with_values(X_omega - A_omega.require_values())


def sparse_times_dense(R: SamplingSet, B: np.ndarray) -> np.ndarray:
    """R @ B for an n x k dense B"""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != R.n:
        raise ArgumentError(f'Dense factor of shape {B.shape} cannot multiply a {R.m}x{R.n} matrix')
    return np.asarray(R.csr @ B)


def transpose_times_dense(R: SamplingSet, C: np.ndarray) -> np.ndarray:
    """R.T @ C for an m x k dense C"""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != R.m:
        raise ArgumentError(f'Dense factor of shape {C.shape} cannot multiply the transpose of a {R.m}x{R.n} matrix')
    return np.asarray(R.csr.T @ C)
