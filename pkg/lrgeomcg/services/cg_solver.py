"""
CG Solver Service
Riemannian nonlinear conjugate gradients on the fixed-rank manifold: PR+
directions, exact linearized initial step, Armijo backtracking and stopping logic
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from lrgeomcg.exceptions import ArgumentError, InvariantViolation, LineSearchError
from lrgeomcg.services.manifold import FixedRankMatrix, TangentVector, inner, retract, transport
from lrgeomcg.services.objective import ObjectiveContext, cost, riemannian_gradient
from lrgeomcg.services.sampling import SamplingSet, apply_proj_omega_lowrank, residual_on_omega

if TYPE_CHECKING:
    from lrgeomcg.services.problems import CompletionProblem

# Configure logging
logger = logging.getLogger(__name__)

TINY = np.finfo(np.float64).tiny

GRADIENT_TOL = 'gradient-tol'
RESIDUAL_TOL = 'residual-tol'
STAGNATION = 'stagnation'
MAX_ITERS = 'max-iters'
LINE_SEARCH_FAILURE = 'line-search-failure'
TERMINATION_REASONS = (GRADIENT_TOL, RESIDUAL_TOL, STAGNATION, MAX_ITERS, LINE_SEARCH_FAILURE)


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ArgumentError(f'Not a boolean: {value!r}')


def _parse_optional_float(value: Any) -> Optional[float]:
    if value is None or str(value).strip().lower() in ('', 'none', 'auto'):
        return None
    return float(value)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, iteration caps and line-search constants of the CG loop"""
    grad_tol: Optional[float] = None          # None: 1e-12 * |A_Omega|
    residual_tol: float = 1e-12
    max_iters: int = 4000
    stagnation: bool = False
    stagnation_threshold: float = 1e-3
    armijo_c: float = 1e-4
    armijo_factor: float = 0.5
    max_backtracks: int = 50
    pr_restart_angle: float = 0.1
    mu: float = 0.0
    assert_bounds: bool = True

    _coercers = {
        'grad_tol': _parse_optional_float,
        'residual_tol': float,
        'max_iters': int,
        'stagnation': _parse_bool,
        'stagnation_threshold': float,
        'armijo_c': float,
        'armijo_factor': float,
        'max_backtracks': int,
        'pr_restart_angle': float,
        'mu': float,
        'assert_bounds': _parse_bool,
    }

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ArgumentError(f'grad_tol must be positive, got {self.grad_tol}')
        for name in ('residual_tol', 'stagnation_threshold', 'armijo_c'):
            if not getattr(self, name) > 0:
                raise ArgumentError(f'{name} must be positive, got {getattr(self, name)}')
        if not 0.0 < self.armijo_factor < 1.0:
            raise ArgumentError(f'armijo_factor must lie in (0, 1), got {self.armijo_factor}')
        if not 0.0 <= self.pr_restart_angle < 1.0:
            raise ArgumentError(f'pr_restart_angle must lie in [0, 1), got {self.pr_restart_angle}')
        if self.max_iters < 1 or self.max_backtracks < 0:
            raise ArgumentError('max_iters must be >= 1 and max_backtracks >= 0')
        if not 0.0 <= self.mu < 1.0:
            raise ArgumentError(f'mu must lie in [0, 1), got {self.mu}')

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, Any], base: Optional['SolverConfig'] = None) -> 'SolverConfig':
        """Build a config from a flat key=value mapping, coercing string values"""
        base = base or cls()
        changes = {}
        for key, value in overrides.items():
            if key not in cls._coercers:
                raise ArgumentError(f'Unknown solver option: {key}')
            try:
                changes[key] = cls._coercers[key](value)
            except (TypeError, ValueError) as exc:
                raise ArgumentError(f'Invalid value for {key}: {value!r}') from exc
        return replace(base, **changes)

    def gradient_tolerance(self, data_norm: float) -> float:
        if self.grad_tol is not None:
            return self.grad_tol
        return max(1e-12 * data_norm, TINY)


@dataclass
class IterationRecord:
    """One row of the solver trace; step fields stay NaN/0 on the final record"""
    iteration: int
    cost: float
    grad_norm: float
    rel_residual: float
    sigma_max: float
    sigma_min: float
    beta: float = math.nan
    alpha: float = math.nan
    step: float = 0.0
    backtracks: int = 0
    wall_ns: int = 0
    phase: str = 'cg'

    @property
    def stepped(self) -> bool:
        return self.step > 0.0


@dataclass
class SolverTrace:
    """Per-iteration records, events and the termination reason of a run"""
    records: List[IterationRecord] = field(default_factory=list)
    termination_reason: Optional[str] = None
    events: List[str] = field(default_factory=list)
    als_sweeps: int = 0

    def cg_records(self) -> List[IterationRecord]:
        return [r for r in self.records if r.phase == 'cg']

    @property
    def iterations(self) -> int:
        """CG iteration index at termination"""
        cg = self.cg_records()
        return cg[-1].iteration if cg else 0

    @property
    def converged(self) -> bool:
        return self.termination_reason in (GRADIENT_TOL, RESIDUAL_TOL, STAGNATION)

    def residuals(self) -> Dict[int, float]:
        return {r.iteration: r.rel_residual for r in self.cg_records()}

    def flag(self, iteration: int, event: str):
        self.events.append(f'{event}@{iteration}')


def initial_step(X: FixedRankMatrix, eta: TangentVector, R: SamplingSet) -> Optional[float]:
    """
    Exact minimizer t* of t -> 1/2 |P_Omega(X + t eta - A)|^2.

    N = P_Omega(eta) is evaluated from the factored form of eta and
    t* = <N, -R> / <N, N>. Returns None when eta is invisible on Omega.
    """
    values = apply_proj_omega_lowrank(*eta.factors(), R)
    nn = float(np.dot(values, values))
    if nn == 0.0:
        return None
    return -float(np.dot(values, R.require_values())) / nn


def pr_plus_direction(prev: Optional[Tuple[TangentVector, TangentVector]], xi: TangentVector,
                      restart_angle: float = 0.1) -> Tuple[TangentVector, float, float]:
    """
    PR+ conjugate direction at the base of ``xi``.

    ``prev`` holds the gradient and direction of the previous iterate, or None
    on the first iteration. Returns (eta, beta, alpha) where alpha is the cosine
    of the angle between eta and xi; directions whose descent cosine falls to
    ``restart_angle`` or below are reset to steepest descent.
    """
    X = xi.base
    if prev is None:
        return -xi, 0.0, -1.0

    xi_prev, eta_prev = prev
    xi_bar = transport(xi_prev, X)
    eta_bar = transport(eta_prev, X)
    denom = inner(xi_prev, xi_prev)
    beta = max(0.0, inner(xi - xi_bar, xi) / denom) if denom > 0.0 else 0.0
    eta = -xi + beta * eta_bar

    norms = eta.norm() * xi.norm()
    alpha = inner(eta, xi) / norms if norms > 0.0 else -1.0
    if -alpha <= restart_angle:
        logger.debug(f"PR+ restart: descent cosine {-alpha:.3e}")
        return -xi, 0.0, -1.0
    return eta, beta, alpha


def armijo_backtrack(X: FixedRankMatrix, eta: TangentVector, t_init: float, xi: TangentVector,
                     cfg: SolverConfig, ctx: ObjectiveContext,
                     f_x: Optional[float] = None) -> Tuple[int, FixedRankMatrix]:
    """
    Smallest m >= 0 with f(X) - f(R_X(c^m t eta)) >= -armijo_c c^m t <xi, eta>.

    Raises:
        LineSearchError: no such m up to cfg.max_backtracks
    """
    if t_init <= 0.0:
        raise ArgumentError(f'Initial step must be positive, got {t_init}')
    slope = inner(xi, eta)
    if f_x is None:
        f_x = cost(X, ctx)
    scale = 1.0
    for m in range(cfg.max_backtracks + 1):
        X_plus = retract(X, (scale * t_init) * eta)
        if f_x - cost(X_plus, ctx) >= -cfg.armijo_c * scale * t_init * slope:
            return m, X_plus
        scale *= cfg.armijo_factor
    raise LineSearchError(f'Armijo condition not met after {cfg.max_backtracks} backtracks')


class GeomCGSolver:
    """
    Geometric CG solver for the completion objective.

    One instance can run any number of independent solves; it holds no
    per-solve state.
    """

    def __init__(self, cfg: Optional[SolverConfig] = None):
        self.cfg = cfg or SolverConfig()

    def solve(self, problem: 'CompletionProblem', X1: FixedRankMatrix,
              trace: Optional[SolverTrace] = None) -> Tuple[FixedRankMatrix, SolverTrace]:
        cfg = self.cfg
        A_omega = problem.A_omega
        if X1.shape != A_omega.shape or X1.k != problem.k:
            raise ArgumentError(
                f'Initial point {X1.shape} rank {X1.k} does not match problem {A_omega.shape} rank {problem.k}'
            )
        ctx = ObjectiveContext(A_omega, cfg.mu)
        trace = trace if trace is not None else SolverTrace()

        data_norm = ctx.data_norm
        grad_tol = cfg.gradient_tolerance(data_norm)
        absolute = data_norm == 0.0
        if absolute:
            logger.warning("Observed data vanish on Omega; reporting absolute residuals")
            trace.flag(0, 'absolute-residual')

        X = X1.attach(A_omega)
        bound_c0 = math.sqrt(cost(X, ctx)) if ctx.regularized and cfg.assert_bounds else None

        logger.info(f"CG solve: {X.m}x{X.n}, rank {X.k}, |Omega| = {len(A_omega)}, mu = {cfg.mu}")
        prev: Optional[Tuple[TangentVector, TangentVector]] = None
        f_prev: Optional[float] = None

        for i in range(1, cfg.max_iters + 1):
            start = time.perf_counter_ns()
            if bound_c0 is not None:
                self._check_bounds(X, bound_c0, i)

            R = residual_on_omega(X, A_omega)
            f_x = cost(X, ctx, R)
            xi = riemannian_gradient(X, ctx, R)
            grad_norm = xi.norm()
            res_norm = R.norm()
            rel_residual = res_norm if absolute else res_norm / data_norm
            record = IterationRecord(i, f_x, grad_norm, rel_residual,
                                     float(X.sigma[0]), float(X.sigma[-1]))
            trace.records.append(record)

            reason = None
            if grad_norm <= grad_tol:
                reason = GRADIENT_TOL
            elif rel_residual <= cfg.residual_tol:
                reason = RESIDUAL_TOL
            elif cfg.stagnation and f_prev is not None and f_prev > 0.0 \
                    and abs(1.0 - math.sqrt(f_x / f_prev)) < cfg.stagnation_threshold:
                reason = STAGNATION
            elif i == cfg.max_iters:
                reason = MAX_ITERS
            if reason is not None:
                record.wall_ns = time.perf_counter_ns() - start
                trace.termination_reason = reason
                break

            eta, beta, alpha = pr_plus_direction(prev, xi, cfg.pr_restart_angle)
            t = initial_step(X, eta, R)
            if t is None or t <= 0.0:
                t = max(grad_norm, TINY)
                logger.warning(f"Initial step fallback at iteration {i}: t = {t:.3e}")
                trace.flag(i, 'step-fallback')

            try:
                m, X_next = armijo_backtrack(X, eta, t, xi, cfg, ctx, f_x)
            except LineSearchError as e:
                logger.warning(f"Line search failed at iteration {i}: {e}")
                record.wall_ns = time.perf_counter_ns() - start
                trace.termination_reason = LINE_SEARCH_FAILURE
                break

            record.beta = beta
            record.alpha = alpha
            record.step = t * cfg.armijo_factor ** m
            record.backtracks = m
            record.wall_ns = time.perf_counter_ns() - start
            logger.debug(
                f"iter {i}: f = {f_x:.6e}, |grad| = {grad_norm:.3e}, res = {rel_residual:.3e}, "
                f"beta = {beta:.3f}, m = {m}"
            )

            prev = (xi, eta)
            f_prev = f_x
            X = X_next

        logger.info(f"CG finished after {trace.iterations} iterations: {trace.termination_reason}")
        return X, trace

    def _check_bounds(self, X: FixedRankMatrix, c0: float, iteration: int):
        """sigma_1 <= C0 / mu and sigma_k >= mu / C0 with C0^2 = g(X_1)"""
        mu = self.cfg.mu
        upper, lower = c0 / mu, mu / c0
        if X.sigma[0] > upper * (1.0 + 1e-12) or X.sigma[-1] < lower * (1.0 - 1e-12):
            raise InvariantViolation(
                f'Singular values [{X.sigma[-1]:.3e}, {X.sigma[0]:.3e}] left [{lower:.3e}, {upper:.3e}] '
                f'at iteration {iteration}'
            )


def solve(problem: 'CompletionProblem', cfg: SolverConfig,
          X1: FixedRankMatrix) -> Tuple[FixedRankMatrix, SolverTrace]:
    """Run geometric CG from X1 on the given problem"""
    return GeomCGSolver(cfg).solve(problem, X1)
