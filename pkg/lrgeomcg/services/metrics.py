"""
Metrics Service
Error, residual and convergence metrics reported for completed solves
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

import numpy as np
from scipy import linalg

from lrgeomcg.services.cg_solver import MAX_ITERS, SolverTrace
from lrgeomcg.services.manifold import FixedRankMatrix
from lrgeomcg.services.objective import ObjectiveContext, error_split
from lrgeomcg.services.problems import CompletionProblem, GroundTruth
from lrgeomcg.services.sampling import SamplingSet, residual_on_omega

# Configure logging
logger = logging.getLogger(__name__)

RHO_START = 10


@dataclass(frozen=True)
class Metric:
    """A metric value, or None when unavailable, with an optional note"""
    name: str
    value: Optional[float]
    note: Optional[str] = None

    @property
    def available(self) -> bool:
        return self.value is not None


def relative_error(X: FixedRankMatrix, truth: Optional[GroundTruth]) -> Metric:
    """|X - A|_F / |A|_F over all entries"""
    if truth is None:
        return Metric('rel_error', None, 'no ground truth')
    if truth.shape != X.shape:
        return Metric('rel_error', None, 'shape mismatch')
    if truth.is_factored:
        # X - A = [U Sigma, -A_L] [V, A_R]^T
        _, R1 = linalg.qr(np.hstack((X.U * X.sigma, -truth.L)), mode='economic')
        _, R2 = linalg.qr(np.hstack((X.V, truth.R)), mode='economic')
        diff = float(np.linalg.norm(R1 @ R2.T))
    else:
        total = 0.0
        US = X.U * X.sigma
        for start, rows in truth.row_blocks():
            block = US[start:start + rows.shape[0]] @ X.V.T - rows
            total += float(np.vdot(block, block))
        diff = math.sqrt(total)
    norm = truth.frobenius_norm()
    if norm == 0.0:
        return Metric('rel_error', diff, 'absolute')
    return Metric('rel_error', diff / norm)


def _relative_on(X: FixedRankMatrix, data: SamplingSet, name: str) -> Metric:
    R = residual_on_omega(X, data)
    norm = data.norm()
    if norm == 0.0:
        logger.warning(f"{name}: reference values vanish, reporting the absolute norm")
        return Metric(name, R.norm(), 'absolute')
    return Metric(name, R.norm() / norm)


def relative_residual(X: FixedRankMatrix, A_omega: SamplingSet) -> Metric:
    """|P_Omega(X - A)| / |P_Omega(A)|"""
    return _relative_on(X, A_omega, 'rel_residual')


def held_out_error(X: FixedRankMatrix, gamma: Optional[SamplingSet]) -> Metric:
    """|P_Gamma(X - A)| / |P_Gamma(A)| on a held-out set"""
    if gamma is None:
        return Metric('test_error', None, 'no test set')
    return _relative_on(X, gamma, 'test_error')


def convergence_factor_from(residuals: Mapping[int, float], termination_reason: Optional[str]) -> Metric:
    """rho = (res(i_end) / res(10))^(1 / (i_end - 10)); 1.0 for runs that hit max_iters"""
    if termination_reason == MAX_ITERS:
        return Metric('rho', 1.0, 'max-iters')
    if not residuals:
        return Metric('rho', None, 'empty trace')
    i_end = max(residuals)
    if i_end < RHO_START + 2 or RHO_START not in residuals:
        return Metric('rho', None, 'trace too short')
    res_start, res_end = residuals[RHO_START], residuals[i_end]
    if res_start <= 0.0 or res_end <= 0.0:
        return Metric('rho', None, 'zero residual')
    return Metric('rho', (res_end / res_start) ** (1.0 / (i_end - RHO_START)))


def convergence_factor(trace: SolverTrace) -> Metric:
    return convergence_factor_from(trace.residuals(), trace.termination_reason)


def iterations_per_decade(rho: Metric) -> Metric:
    """Iterations needed to gain one digit at factor rho"""
    if rho.value is None or not 0.0 < rho.value < 1.0:
        return Metric('iterations_per_decade', None, 'no linear convergence')
    return Metric('iterations_per_decade', -1.0 / math.log10(rho.value))


def tail_mean_beta(trace: SolverTrace) -> Metric:
    """Mean PR+ beta over the second half of the CG steps"""
    betas = [r.beta for r in trace.cg_records() if r.stepped]
    if not betas:
        return Metric('beta_tail_mean', None, 'no steps')
    tail = betas[len(betas) // 2:]
    return Metric('beta_tail_mean', float(np.mean(tail)))


def armijo_zero_fraction(trace: SolverTrace) -> Metric:
    """Fraction of CG steps accepted without backtracking"""
    steps = [r for r in trace.cg_records() if r.stepped]
    if not steps:
        return Metric('armijo_zero_fraction', None, 'no steps')
    return Metric('armijo_zero_fraction', sum(r.backtracks == 0 for r in steps) / len(steps))


def off_sample_error(X: FixedRankMatrix, problem: CompletionProblem) -> Metric:
    """|P_Omega^perp(X - A)|_F / |A|_F, by Pythagoras from the full and sampled errors"""
    truth = problem.ground_truth
    full = relative_error(X, truth)
    if full.value is None or full.note == 'absolute':
        return Metric('e3', None, 'no ground truth')
    norm = truth.frobenius_norm()
    clean = problem.clean_omega if problem.clean_omega is not None else problem.A_omega
    sampled = residual_on_omega(X, clean).norm()
    total = (full.value * norm) ** 2
    return Metric('e3', math.sqrt(max(0.0, total - sampled ** 2)) / norm)


def ns_per_work_unit(trace: SolverTrace, problem: CompletionProblem) -> Metric:
    """Mean CG iteration wall time divided by n k^2 + |Omega| k"""
    times = [r.wall_ns for r in trace.cg_records()]
    if not times:
        return Metric('ns_per_work_unit', None, 'no iterations')
    work = problem.n * problem.k ** 2 + len(problem.A_omega) * problem.k
    return Metric('ns_per_work_unit', float(np.mean(times)) / work)


def solution_metrics(problem: CompletionProblem, X: FixedRankMatrix, trace: SolverTrace,
                     record_timing: bool = False) -> Dict[str, Any]:
    """All metrics of a finished solve as a flat mapping (None when unavailable)"""
    ctx = ObjectiveContext(problem.A_omega)
    e1, e2 = error_split(X, ctx)
    rho = convergence_factor(trace)
    results = {
        'iterations': trace.iterations,
        'als_sweeps': trace.als_sweeps,
        'iteration_equivalents': trace.als_sweeps + trace.iterations,
        'termination': trace.termination_reason,
        'rel_residual': relative_residual(X, problem.A_omega).value,
        'rel_residual_clean': (relative_residual(X, problem.clean_omega).value
                               if problem.clean_omega is not None else None),
        'rel_error': relative_error(X, problem.ground_truth).value,
        'test_error': held_out_error(X, problem.test_set).value,
        'e1': e1,
        'e2': e2,
        'e3': off_sample_error(X, problem).value,
        'rho': rho.value,
        'iterations_per_decade': iterations_per_decade(rho).value,
        'beta_tail_mean': tail_mean_beta(trace).value,
        'armijo_zero_fraction': armijo_zero_fraction(trace).value,
        'events': ';'.join(trace.events),
    }
    if record_timing:
        results['ns_per_work_unit'] = ns_per_work_unit(trace, problem).value
    return results
