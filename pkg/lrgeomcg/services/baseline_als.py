"""
ALS Baseline Service
Alternating least squares on a factor pair X = L R^T, used alone or as the
warm-start phase of the hybrid ALS + CG strategy
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from lrgeomcg.exceptions import ArgumentError
from lrgeomcg.services.cg_solver import GeomCGSolver, IterationRecord, SolverConfig, SolverTrace
from lrgeomcg.services.manifold import FixedRankMatrix, from_factors
from lrgeomcg.services.problems import STREAM_INIT, CompletionProblem, substream
from lrgeomcg.services.sampling import SamplingSet, apply_proj_omega_lowrank

# Configure logging
logger = logging.getLogger(__name__)

# Iterate norm over its Omega-extrapolated norm that triggers a ridged ALS restart
SWAMP_LIMIT = 1.25
SWAMP_RIDGE_SCALE = 0.5


@dataclass(frozen=True)
class FactorPair:
    """Working model X = L R^T with no orthonormality constraint"""
    L: np.ndarray
    R: np.ndarray
    ridge_bumps: int = 0

    def __post_init__(self):
        if self.L.ndim != 2 or self.R.ndim != 2 or self.L.shape[1] != self.R.shape[1]:
            raise ArgumentError(f'Incompatible factor shapes {self.L.shape} and {self.R.shape}')

    @property
    def k(self) -> int:
        return self.L.shape[1]

    @classmethod
    def random(cls, m: int, n: int, k: int, seed) -> 'FactorPair':
        rng = np.random.default_rng(seed)
        L = rng.standard_normal((m, k))
        R = rng.standard_normal((n, k))
        return cls(L, R)


def _solve_rows(fixed: np.ndarray, owner: np.ndarray, other: np.ndarray, values: np.ndarray,
                count: int, ridge: float) -> Tuple[np.ndarray, int]:
    """
    For each index p < count, minimize sum over entries owned by p of
    (x_p . fixed[other] - value)^2 + ridge |x_p|^2 via the k x k normal system.
    Entries must be grouped by ``owner``.
    """
    k = fixed.shape[1]
    out = np.zeros((count, k))
    bumps = 0
    bounds = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(np.bincount(owner, minlength=count), out=bounds[1:])
    eye = np.eye(k)
    for p in range(count):
        block = slice(bounds[p], bounds[p + 1])
        if bounds[p] == bounds[p + 1]:
            continue
        F = fixed[other[block]]
        G = F.T @ F
        rhs = F.T @ values[block]
        try:
            out[p] = linalg.solve(G + ridge * eye, rhs, assume_a='pos')
        except linalg.LinAlgError:
            bump = max(ridge, 1e-12 * np.trace(G) / k, np.finfo(np.float64).tiny)
            out[p] = linalg.solve(G + bump * eye, rhs, assume_a='pos')
            bumps += 1
    return out, bumps


def _check(F: FactorPair, A_omega: SamplingSet, ridge: float):
    if ridge < 0:
        raise ArgumentError(f'Ridge must be non-negative, got {ridge}')
    if F.L.shape[0] != A_omega.m or F.R.shape[0] != A_omega.n:
        raise ArgumentError(f'Factors {F.L.shape}, {F.R.shape} do not match a {A_omega.m}x{A_omega.n} set')


def update_right(F: FactorPair, A_omega: SamplingSet, ridge: float = 0.0) -> FactorPair:
    """Exact minimization over R with L fixed"""
    _check(F, A_omega, ridge)
    values = A_omega.require_values()
    by_col = np.argsort(A_omega.cols, kind='stable')
    R, bumps = _solve_rows(F.L, A_omega.cols[by_col], A_omega.rows[by_col], values[by_col],
                           A_omega.n, ridge)
    return FactorPair(F.L, R, F.ridge_bumps + bumps)


def update_left(F: FactorPair, A_omega: SamplingSet, ridge: float = 0.0) -> FactorPair:
    """Exact minimization over L with R fixed"""
    _check(F, A_omega, ridge)
    L, bumps = _solve_rows(F.R, A_omega.rows, A_omega.cols, A_omega.require_values(), A_omega.m, ridge)
    return FactorPair(L, F.R, F.ridge_bumps + bumps)


def als_sweep(F: FactorPair, A_omega: SamplingSet, ridge: float = 0.0) -> FactorPair:
    """
    One ALS sweep: update_right then update_left. Singular normal systems get
    a small ridge, counted in ``ridge_bumps``.
    """
    F_next = update_left(update_right(F, A_omega, ridge), A_omega, ridge)
    bumps = F_next.ridge_bumps - F.ridge_bumps
    if bumps:
        logger.warning(f"ALS ridge bumped on {bumps} singular normal systems")
    return F_next


def als_objective(F: FactorPair, A_omega: SamplingSet, ridge: float = 0.0) -> float:
    """sum over Omega of (L R^T - A)^2 + ridge (|L|^2 + |R|^2)"""
    diff = apply_proj_omega_lowrank(F.L, F.R, A_omega) - A_omega.require_values()
    value = float(np.dot(diff, diff))
    if ridge:
        value += ridge * (float(np.vdot(F.L, F.L)) + float(np.vdot(F.R, F.R)))
    return value


def to_fixed_rank(F: FactorPair, omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    """Compact SVD form of L R^T (QR of both factors and a k x k SVD)"""
    return from_factors(F.L, F.R, omega)


def _product_norm(F: FactorPair) -> float:
    """|L R^T|_F from the k x k Gram matrices"""
    return math.sqrt(max(0.0, float(np.sum((F.L.T @ F.L) * (F.R.T @ F.R)))))


def swamp_ratio(F: FactorPair, fitted: np.ndarray, A_omega: SamplingSet) -> float:
    """
    |L R^T|_F over the norm extrapolated from its own values on Omega,
    |(L R^T)_Omega| sqrt(mn / |Omega|). Close to 1 for incoherent iterates;
    large when the factors grow in directions Omega does not see.
    """
    sampled = float(np.linalg.norm(fitted)) * math.sqrt(A_omega.m * A_omega.n / max(len(A_omega), 1))
    if sampled == 0.0:
        return math.inf if _product_norm(F) > 0.0 else 1.0
    return _product_norm(F) / sampled


def swamp_ridge(A_omega: SamplingSet) -> float:
    """Ridge matched to the mean squared observed value"""
    return SWAMP_RIDGE_SCALE * A_omega.norm() ** 2 / max(len(A_omega), 1)


def solve_hybrid(problem: CompletionProblem, sweeps: int, cfg: SolverConfig, seed: int,
                 ridge: float = 0.0) -> Tuple[FixedRankMatrix, SolverTrace]:
    """
    ``sweeps`` ALS sweeps from a random factor pair, then geometric CG from the
    converted point. The trace holds both phases, marked 'als' and 'cg'.

    When an iterate's norm outgrows what its values on Omega support (see
    ``swamp_ratio``) the ALS phase restarts from the initial pair with a ridge
    of ``swamp_ridge`` for the sweeps that remain; the event is flagged as
    'als-swamp'.
    """
    if sweeps < 0:
        raise ArgumentError(f'Number of ALS sweeps must be non-negative, got {sweeps}')
    A_omega = problem.A_omega
    data_norm = A_omega.norm()
    F0 = FactorPair.random(problem.m, problem.n, problem.k, substream(seed, STREAM_INIT))
    F = F0
    guarded = True
    trace = SolverTrace()

    for sweep in range(1, sweeps + 1):
        start = time.perf_counter_ns()
        F = als_sweep(F, A_omega, ridge)
        objective = als_objective(F, A_omega)
        rel_residual = math.sqrt(objective) / data_norm if data_norm > 0 else math.sqrt(objective)
        trace.records.append(IterationRecord(
            sweep, 0.5 * objective, math.nan, rel_residual, math.nan, math.nan,
            wall_ns=time.perf_counter_ns() - start, phase='als',
        ))
        if guarded and swamp_ratio(F, apply_proj_omega_lowrank(F.L, F.R, A_omega), A_omega) > SWAMP_LIMIT:
            ridge = max(ridge, swamp_ridge(A_omega))
            logger.warning(f"ALS factors outgrew their fit after sweep {sweep}; "
                           f"restarting with ridge {ridge:.3e}")
            trace.flag(sweep, 'als-swamp')
            F = FactorPair(F0.L, F0.R, F.ridge_bumps)
            guarded = False
    trace.als_sweeps = sweeps
    if F.ridge_bumps:
        trace.flag(sweeps, 'als-ridge-bump')
    logger.info(f"ALS phase finished after {sweeps} sweeps")

    X1 = to_fixed_rank(F, A_omega)
    return GeomCGSolver(cfg).solve(problem, X1, trace)
