"""
Problems Service
Completion problem generators: random low-rank instances, the noise model,
bivariate-function matrices, oversampling arithmetic, epsilon-rank and
homotopy rank continuation
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from lrgeomcg.exceptions import ArgumentError
from lrgeomcg.services.manifold import FixedRankMatrix, random_point
from lrgeomcg.services.sampling import SamplingSet, apply_proj_omega_lowrank, sample_uniform

# Configure logging
logger = logging.getLogger(__name__)

# Independent random streams derived from one experiment seed
STREAM_TRUTH = 0
STREAM_OMEGA = 1
STREAM_TEST = 2
STREAM_NOISE = 3
STREAM_INIT = 4
STREAM_HOMOTOPY = 5

ROW_BLOCK = 256


def substream(seed: int, stream: int) -> np.random.SeedSequence:
    """Seed sequence for one named stream of an experiment seed"""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))


@dataclass(frozen=True)
class BivariateFunction:
    """Entries 1 / (sigma + (x_i - y_j)^2) on uniform grids over [0, 1]"""
    n: int
    sigma: float

    def __post_init__(self):
        if self.n < 2:
            raise ArgumentError(f'Grid size must be at least 2, got {self.n}')
        if not self.sigma > 0:
            raise ArgumentError(f'Decay parameter must be positive, got {self.sigma}')

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    def entries(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        grid = self.grid
        return 1.0 / (self.sigma + (grid[rows] - grid[cols]) ** 2)

    def rows(self, start: int, stop: int) -> np.ndarray:
        grid = self.grid
        return 1.0 / (self.sigma + (grid[start:stop, None] - grid[None, :]) ** 2)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """
    Full matrix A behind a completion problem, held as factors A = L R^T,
    as a dense array or as an entry function.
    """
    m: int
    n: int
    L: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None
    dense: Optional[np.ndarray] = None
    function: Optional[BivariateFunction] = None

    def __post_init__(self):
        kinds = sum(x is not None for x in (self.L, self.dense, self.function))
        if kinds != 1 or (self.L is None) != (self.R is None):
            raise ArgumentError('Ground truth needs exactly one of factors, dense matrix or function')
        if self.L is not None and (self.L.shape[0] != self.m or self.R.shape[0] != self.n
                                   or self.L.shape[1] != self.R.shape[1]):
            raise ArgumentError(f'Factor shapes {self.L.shape}, {self.R.shape} do not match {self.m}x{self.n}')
        if self.dense is not None and self.dense.shape != (self.m, self.n):
            raise ArgumentError(f'Dense shape {self.dense.shape} does not match {self.m}x{self.n}')

    @classmethod
    def from_factors(cls, L: np.ndarray, R: np.ndarray) -> 'GroundTruth':
        L = np.asarray(L, dtype=np.float64)
        R = np.asarray(R, dtype=np.float64)
        return cls(L.shape[0], R.shape[0], L=L, R=R)

    @classmethod
    def from_dense(cls, A: np.ndarray) -> 'GroundTruth':
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise ArgumentError('Dense ground truth must be a 2-D array')
        return cls(A.shape[0], A.shape[1], dense=A)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.m, self.n)

    @property
    def is_factored(self) -> bool:
        return self.L is not None

    def gather(self, omega: SamplingSet) -> np.ndarray:
        """Values of A on the index set"""
        if omega.shape != self.shape:
            raise ArgumentError(f'Sampling set shape {omega.shape} does not match {self.shape}')
        if self.L is not None:
            return apply_proj_omega_lowrank(self.L, self.R, omega)
        if self.dense is not None:
            return omega.gather(self.dense)
        return self.function.entries(omega.rows, omega.cols)

    def sample(self, omega: SamplingSet) -> SamplingSet:
        return omega.with_values(self.gather(omega))

    def row_blocks(self, block: int = ROW_BLOCK) -> Iterator[Tuple[int, np.ndarray]]:
        """Dense row blocks (start, A[start:start + block])"""
        for start in range(0, self.m, block):
            stop = min(start + block, self.m)
            if self.L is not None:
                yield start, self.L[start:stop] @ self.R.T
            elif self.dense is not None:
                yield start, self.dense[start:stop]
            else:
                yield start, self.function.rows(start, stop)

    def frobenius_norm(self) -> float:
        if self.L is not None:
            # |L R^T|^2 = <L^T L, R^T R>
            return float(np.sqrt(max(0.0, np.vdot(self.L.T @ self.L, self.R.T @ self.R))))
        return float(np.sqrt(sum(np.vdot(rows, rows) for _, rows in self.row_blocks())))

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return np.vstack([rows for _, rows in self.row_blocks()])


@dataclass(frozen=True)
class CompletionProblem:
    """
    A completion instance: observed data on Omega, target rank k, and
    optionally a test set Gamma, the ground truth and the noiseless values on
    Omega when the observations are noisy.
    """
    m: int
    n: int
    k: int
    A_omega: SamplingSet
    test_set: Optional[SamplingSet] = None
    ground_truth: Optional[GroundTruth] = None
    noise_level: Optional[float] = None
    clean_omega: Optional[SamplingSet] = None

    def __post_init__(self):
        if self.k < 1 or self.k > min(self.m, self.n):
            raise ArgumentError(f'Rank {self.k} outside [1, {min(self.m, self.n)}]')
        if self.A_omega.shape != (self.m, self.n) or not self.A_omega.has_values:
            raise ArgumentError('Observed data must carry values and match the problem shape')
        for name in ('test_set', 'clean_omega'):
            other = getattr(self, name)
            if other is not None and (other.shape != (self.m, self.n) or not other.has_values):
                raise ArgumentError(f'{name} must carry values and match the problem shape')
        if self.ground_truth is not None and self.ground_truth.shape != (self.m, self.n):
            raise ArgumentError(f'Ground truth shape {self.ground_truth.shape} does not match {self.m}x{self.n}')

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.m, self.n)

    @property
    def oversampling(self) -> float:
        return len(self.A_omega) / (self.k * (self.m + self.n - self.k))

    def with_rank(self, k: int) -> 'CompletionProblem':
        return CompletionProblem(self.m, self.n, k, self.A_omega, self.test_set,
                                 self.ground_truth, self.noise_level, self.clean_omega)


def oversampling_size(m: int, n: int, k: int, os_factor: float) -> int:
    """|Omega| = round(OS k (m + n - k))"""
    if os_factor < 1:
        raise ArgumentError(f'Oversampling factor must be at least 1, got {os_factor}')
    if not 1 <= k <= min(m, n):
        raise ArgumentError(f'Rank {k} outside [1, {min(m, n)}]')
    size = int(round(os_factor * k * (m + n - k)))
    if size > m * n:
        raise ArgumentError(f'Oversampling {os_factor} needs {size} entries, more than {m}x{n}')
    return size


def gen_random_lowrank(m: int, n: int, k: int, seed) -> GroundTruth:
    """Factored A = A_L A_R^T with i.i.d. standard Gaussian factors"""
    if not 1 <= k <= min(m, n):
        raise ArgumentError(f'Rank {k} outside [1, {min(m, n)}]')
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((m, k))
    R = rng.standard_normal((n, k))
    return GroundTruth.from_factors(L, R)


def gen_noisy_values(truth: GroundTruth, omega: SamplingSet, epsilon: float, seed) -> SamplingSet:
    """
    Observations A_Omega + eps (|A_Omega| / |N_Omega|) N_Omega with N standard
    Gaussian on Omega, so that |values - A_Omega| = eps |A_Omega|.
    """
    if epsilon < 0:
        raise ArgumentError(f'Noise level must be non-negative, got {epsilon}')
    clean = truth.gather(omega)
    if epsilon == 0:
        return omega.with_values(clean)
    noise = np.random.default_rng(seed).standard_normal(len(omega))
    scale = epsilon * np.sqrt(np.dot(clean, clean)) / np.sqrt(np.dot(noise, noise))
    return omega.with_values(clean + scale * noise)


def gen_bivariate(n: int, sigma: float, dense: bool = True) -> GroundTruth:
    """Ground truth A(i, j) = 1 / (sigma + (x_i - y_j)^2), densified or as an entry function"""
    function = BivariateFunction(n, sigma)
    if dense:
        return GroundTruth.from_dense(function.rows(0, n))
    return GroundTruth(n, n, function=function)


def epsilon_rank(singular_values: Sequence[float], epsilon: float) -> int:
    """Number of singular values strictly above epsilon"""
    values = np.asarray(singular_values, dtype=np.float64)
    if values.size and (np.any(values < 0) or np.any(np.diff(values) > 0)):
        raise ArgumentError('Singular values must be non-negative and non-increasing')
    return int(np.count_nonzero(values > epsilon))


def _unit_orthogonal(Q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random unit vector orthogonal to the columns of Q (two Gram-Schmidt passes)"""
    v = rng.standard_normal(Q.shape[0])
    for _ in range(2):
        v = v - Q @ (Q.T @ v)
    return v / np.linalg.norm(v)


def homotopy_init(X_prev: FixedRankMatrix, seed) -> FixedRankMatrix:
    """
    Rank-k starting point from a rank-(k-1) solution: random unit directions
    orthogonal to U and V are appended and the smallest singular value is
    duplicated.
    """
    if X_prev.k >= X_prev.m or X_prev.k >= X_prev.n:
        raise ArgumentError(f'Cannot extend rank {X_prev.k} in a {X_prev.m}x{X_prev.n} matrix')
    rng = np.random.default_rng(seed)
    u = _unit_orthogonal(X_prev.U, rng)
    v = _unit_orthogonal(X_prev.V, rng)
    U = np.column_stack((X_prev.U, u))
    V = np.column_stack((X_prev.V, v))
    sigma = np.append(X_prev.sigma, X_prev.sigma[-1])
    order = np.argsort(-sigma, kind='stable')
    return FixedRankMatrix(U[:, order], sigma[order], V[:, order], X_prev.omega)


def random_start(problem: CompletionProblem, seed) -> FixedRankMatrix:
    """Random Gaussian rank-k initial guess with the X_Omega cache of the problem"""
    return random_point(problem.m, problem.n, problem.k, substream(seed, STREAM_INIT), problem.A_omega)


def make_random_problem(m: int, n: int, k: int, os_factor: float, seed: int,
                        noise: float = 0.0, with_test_set: bool = False) -> CompletionProblem:
    """Random rank-k instance with |Omega| from the oversampling factor"""
    truth = gen_random_lowrank(m, n, k, substream(seed, STREAM_TRUTH))
    size = oversampling_size(m, n, k, os_factor)
    omega = sample_uniform(m, n, size, substream(seed, STREAM_OMEGA))
    clean = truth.sample(omega)
    observed = gen_noisy_values(truth, omega, noise, substream(seed, STREAM_NOISE)) if noise > 0 else clean
    test_set = None
    if with_test_set:
        gamma = sample_uniform(m, n, size, substream(seed, STREAM_TEST), require_coverage=False)
        test_set = truth.sample(gamma)
    logger.debug(f"Random problem {m}x{n}, k = {k}, |Omega| = {size}, noise = {noise}, seed = {seed}")
    return CompletionProblem(m, n, k, observed, test_set, truth,
                             noise if noise > 0 else None, clean if noise > 0 else None)


def make_bivariate_problem(n: int, sigma: float, k: int, size: int, seed: int,
                           dense: bool = True) -> CompletionProblem:
    """Bivariate-function instance with a test set Gamma as large as Omega"""
    truth = gen_bivariate(n, sigma, dense)
    omega = sample_uniform(n, n, size, substream(seed, STREAM_OMEGA))
    gamma = sample_uniform(n, n, size, substream(seed, STREAM_TEST), require_coverage=False)
    logger.debug(f"Bivariate problem n = {n}, sigma = {sigma}, |Omega| = {size}, seed = {seed}")
    return CompletionProblem(n, n, k, truth.sample(omega), truth.sample(gamma), truth)
