"""
Objective Service
Completion cost f, its regularized variant g, Riemannian gradient and Hessian,
and the tangent/normal split of the sampled error
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lrgeomcg.exceptions import ArgumentError, BaseMismatchError
from lrgeomcg.services.manifold import FixedRankMatrix, TangentVector, project_sparse_to_tangent
from lrgeomcg.services.sampling import (
    SamplingSet,
    apply_proj_omega_lowrank,
    residual_on_omega,
    sparse_times_dense,
    transpose_times_dense,
)

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveContext:
    """Observed data A_Omega and the regularization weight mu (0 disables g)"""
    A_omega: SamplingSet
    mu: float = 0.0

    def __post_init__(self):
        if not self.A_omega.has_values:
            raise ArgumentError('Objective needs observed values on Omega')
        if not 0.0 <= self.mu < 1.0:
            raise ArgumentError(f'Regularization weight must lie in [0, 1), got {self.mu}')

    @property
    def regularized(self) -> bool:
        return self.mu > 0.0

    @property
    def data_norm(self) -> float:
        return self.A_omega.norm()


def _residual(X: FixedRankMatrix, ctx: ObjectiveContext, residual: Optional[SamplingSet]) -> SamplingSet:
    return residual if residual is not None else residual_on_omega(X, ctx.A_omega)


def cost_f(X: FixedRankMatrix, ctx: ObjectiveContext, residual: Optional[SamplingSet] = None) -> float:
    """f(X) = 1/2 |P_Omega(X - A)|_F^2"""
    R = _residual(X, ctx, residual)
    return 0.5 * float(np.dot(R.values, R.values))


def regularizer(X: FixedRankMatrix) -> float:
    """|X^+|_F^2 + |X|_F^2 from the singular values"""
    return float(np.sum(X.sigma ** -2) + np.sum(X.sigma ** 2))


def cost_g(X: FixedRankMatrix, ctx: ObjectiveContext, residual: Optional[SamplingSet] = None) -> float:
    """g(X) = f(X) + mu^2 (|X^+|_F^2 + |X|_F^2)"""
    value = cost_f(X, ctx, residual)
    if ctx.mu > 0.0:
        value += ctx.mu ** 2 * regularizer(X)
    return value


def cost(X: FixedRankMatrix, ctx: ObjectiveContext, residual: Optional[SamplingSet] = None) -> float:
    """The objective being minimized: g when regularized, f otherwise"""
    return cost_g(X, ctx, residual) if ctx.regularized else cost_f(X, ctx, residual)


def riemannian_gradient(X: FixedRankMatrix, ctx: ObjectiveContext,
                        residual: Optional[SamplingSet] = None) -> TangentVector:
    """
    Riemannian gradient: tangent projection of the sparse residual.

    With mu > 0 the regularizer gradient 2 mu^2 U (Sigma - Sigma^-3) V^T is
    added to the M block.
    """
    grad = project_sparse_to_tangent(X, _residual(X, ctx, residual))
    if ctx.mu > 0.0:
        reg = 2.0 * ctx.mu ** 2 * np.diag(X.sigma - X.sigma ** -3)
        grad = TangentVector(grad.M + reg, grad.Up, grad.Vp, X)
    return grad


def hessian_apply(X: FixedRankMatrix, xi: TangentVector, ctx: ObjectiveContext,
                  residual: Optional[SamplingSet] = None) -> TangentVector:
    """
    Riemannian Hessian of f at X applied to xi.

    With S = P_Omega(xi) and R = P_Omega(X - A):
        M  = U^T S V
        Up = P_U^perp (S V + R Vp Sigma^-1)
        Vp = P_V^perp (S^T U + R^T Up Sigma^-1)
    """
    if ctx.mu > 0.0:
        raise ArgumentError('Hessian is only available for the unregularized objective')
    if xi.base.token is not X.token:
        raise BaseMismatchError('Tangent vector is not based at X')
    U, V = X.U, X.V
    sinv = 1.0 / X.sigma
    S = ctx.A_omega.with_values(apply_proj_omega_lowrank(*xi.factors(), ctx.A_omega))
    R = _residual(X, ctx, residual)

    SV = sparse_times_dense(S, V)
    StU = transpose_times_dense(S, U)
    M = U.T @ SV
    Up = SV + sparse_times_dense(R, xi.Vp) * sinv
    Up = Up - U @ (U.T @ Up)
    Vp = StU + transpose_times_dense(R, xi.Up) * sinv
    Vp = Vp - V @ (V.T @ Vp)
    return TangentVector(M, Up, Vp, X)


def error_split(X: FixedRankMatrix, ctx: ObjectiveContext,
                residual: Optional[SamplingSet] = None) -> Tuple[float, float]:
    """Norms (e1, e2) of the tangent and normal parts of P_Omega(X - A)"""
    R = _residual(X, ctx, residual)
    e1 = project_sparse_to_tangent(X, R).norm()
    total = float(np.dot(R.values, R.values))
    e2 = float(np.sqrt(max(0.0, total - e1 ** 2)))
    return e1, e2
