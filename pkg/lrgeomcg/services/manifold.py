"""
Manifold Service
Geometry of the manifold of m x n matrices of fixed rank k, embedded in R^{m x n}:
points, tangent vectors, metric, projections, retractions and vector transport
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from lrgeomcg.exceptions import ArgumentError, BaseMismatchError, RankDeficiencyError
from lrgeomcg.services.sampling import (
    SamplingSet,
    apply_proj_omega_lowrank,
    sparse_times_dense,
    transpose_times_dense,
)

# Configure logging
logger = logging.getLogger(__name__)

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True, eq=False)
class FixedRankMatrix:
    """
    A rank-k point X = U diag(sigma) V^T stored as a compact SVD.

    U (m x k) and V (n x k) have orthonormal columns and sigma is positive and
    non-increasing. When ``omega`` is given, the sampled values X_Omega are
    computed once at construction and kept in ``omega_values``; instances are
    never mutated, so the cache cannot go stale.
    """
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    omega: Optional[SamplingSet] = None
    omega_values: Optional[np.ndarray] = field(default=None, repr=False)
    token: object = field(default_factory=object, repr=False)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=np.float64)
        V = np.asarray(self.V, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64).reshape(-1)
        k = sigma.size
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != k or V.shape[1] != k:
            raise ArgumentError(f'Inconsistent factor shapes U{U.shape}, sigma({k},), V{V.shape}')
        if k < 1:
            raise ArgumentError('Rank must be at least 1')
        if not np.all(sigma > 0):
            raise RankDeficiencyError(f'Singular values must be positive, smallest is {sigma.min():.3e}')
        if np.any(np.diff(sigma) > 0):
            raise ArgumentError('Singular values must be non-increasing')
        object.__setattr__(self, 'U', U)
        object.__setattr__(self, 'V', V)
        object.__setattr__(self, 'sigma', sigma)
        if self.omega is not None:
            if self.omega.shape != (U.shape[0], V.shape[0]):
                raise ArgumentError(f'Sampling set shape {self.omega.shape} does not match {self.shape}')
            if self.omega_values is None:
                values = apply_proj_omega_lowrank(U * sigma, V, self.omega)
                values.flags.writeable = False
                object.__setattr__(self, 'omega_values', values)

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def k(self) -> int:
        return self.sigma.size

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.m, self.n)

    def attach(self, omega: Optional[SamplingSet]) -> 'FixedRankMatrix':
        """Same point (same base token) with the X_Omega cache for ``omega``"""
        if omega is self.omega:
            return self
        return FixedRankMatrix(self.U, self.sigma, self.V, omega, token=self.token)

    def omega_values_for(self, omega: SamplingSet) -> np.ndarray:
        """X_Omega for the given index set, from the cache when it matches"""
        if self.omega is not None and self.omega_values is not None and self.omega.same_indices(omega):
            return self.omega_values
        return apply_proj_omega_lowrank(self.U * self.sigma, self.V, omega)

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.sigma))

    def to_dense(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T

    def orthonormality_error(self) -> float:
        eye = np.eye(self.k)
        return max(np.linalg.norm(self.U.T @ self.U - eye), np.linalg.norm(self.V.T @ self.V - eye))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """
    Tangent vector xi = U M V^T + Up V^T + U Vp^T at ``base`` = U Sigma V^T,
    with U^T Up = 0 and V^T Vp = 0.
    """
    M: np.ndarray
    Up: np.ndarray
    Vp: np.ndarray
    base: FixedRankMatrix

    def _check_base(self, other: 'TangentVector'):
        if other.base.token is not self.base.token:
            raise BaseMismatchError('Tangent vectors live at different base points')

    def __add__(self, other: 'TangentVector') -> 'TangentVector':
        self._check_base(other)
        return TangentVector(self.M + other.M, self.Up + other.Up, self.Vp + other.Vp, self.base)

    def __sub__(self, other: 'TangentVector') -> 'TangentVector':
        self._check_base(other)
        return TangentVector(self.M - other.M, self.Up - other.Up, self.Vp - other.Vp, self.base)

    def __mul__(self, scalar: float) -> 'TangentVector':
        return TangentVector(scalar * self.M, scalar * self.Up, scalar * self.Vp, self.base)

    __rmul__ = __mul__

    def __neg__(self) -> 'TangentVector':
        return TangentVector(-self.M, -self.Up, -self.Vp, self.base)

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self)))

    def factors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Factors (Y1, Y2) with xi = Y1 Y2^T: [U M + Up, U] and [V, Vp]"""
        U, V = self.base.U, self.base.V
        return np.hstack((U @ self.M + self.Up, U)), np.hstack((V, self.Vp))

    def to_dense(self) -> np.ndarray:
        Y1, Y2 = self.factors()
        return Y1 @ Y2.T

    def tangency_error(self) -> float:
        """Relative violation of U^T Up = 0 and V^T Vp = 0"""
        U, V = self.base.U, self.base.V
        err_u = np.linalg.norm(U.T @ self.Up) / max(np.linalg.norm(self.Up), EPS)
        err_v = np.linalg.norm(V.T @ self.Vp) / max(np.linalg.norm(self.Vp), EPS)
        return float(max(err_u, err_v))


def zero_vector(X: FixedRankMatrix) -> TangentVector:
    return TangentVector(np.zeros((X.k, X.k)), np.zeros((X.m, X.k)), np.zeros((X.n, X.k)), X)


def inner(xi: TangentVector, eta: TangentVector) -> float:
    """Riemannian metric: the ambient trace inner product, evaluated blockwise"""
    xi._check_base(eta)
    return float(np.vdot(xi.M, eta.M) + np.vdot(xi.Up, eta.Up) + np.vdot(xi.Vp, eta.Vp))


def tangent_axpy(a: float, xi: TangentVector, eta: TangentVector) -> TangentVector:
    """a * xi + eta"""
    xi._check_base(eta)
    return TangentVector(a * xi.M + eta.M, a * xi.Up + eta.Up, a * xi.Vp + eta.Vp, xi.base)


def canonical_signs(U: np.ndarray, V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Flip singular vector pairs so the largest-magnitude entry of each U column is positive"""
    if U.shape[1] == 0:
        return U, V
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def compact_svd_of_product(L: np.ndarray, R: np.ndarray, k: int,
                           omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    """
    Compact SVD of L R^T via economic QR of both factors and an SVD of the
    small core, truncated to rank k.

    Raises:
        RankDeficiencyError: the product has numerical rank below k
    """
    Ql, Rl = linalg.qr(L, mode='economic')
    Qr, Rr = linalg.qr(R, mode='economic')
    Uc, s, Vch = linalg.svd(Rl @ Rr.T, lapack_driver='gesvd')
    if s.size < k:
        raise RankDeficiencyError(f'Product of rank at most {s.size} cannot represent rank {k}')
    tol = max(L.shape[0], R.shape[0]) * EPS * (s[0] if s.size else 0.0)
    if s[k - 1] <= tol:
        raise RankDeficiencyError(f'Numerical rank below {k}: sigma_k = {s[k - 1]:.3e}')
    U, V = canonical_signs(Ql @ Uc[:, :k], Qr @ Vch[:k].T)
    return FixedRankMatrix(U, s[:k], V, omega)


def from_factors(L: np.ndarray, R: np.ndarray, omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    """Convert a factor pair X = L R^T (no orthonormality) to compact SVD form"""
    L = np.asarray(L, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if L.ndim != 2 or R.ndim != 2 or L.shape[1] != R.shape[1]:
        raise ArgumentError(f'Incompatible factor shapes {L.shape} and {R.shape}')
    return compact_svd_of_product(L, R, L.shape[1], omega)


def random_point(m: int, n: int, k: int, seed, omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    """Random rank-k point from a product of standard Gaussian factors"""
    if not 1 <= k <= min(m, n):
        raise ArgumentError(f'Rank {k} outside [1, {min(m, n)}]')
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((m, k))
    R = rng.standard_normal((n, k))
    return from_factors(L, R, omega)


def project_dense_to_tangent(X: FixedRankMatrix, Z: np.ndarray) -> TangentVector:
    """Orthogonal projection of a dense m x n matrix onto the tangent space at X"""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape != X.shape:
        raise ArgumentError(f'Matrix shape {Z.shape} does not match {X.shape}')
    ZV = Z @ X.V
    M = X.U.T @ ZV
    Up = ZV - X.U @ M
    Vp = Z.T @ X.U - X.V @ M.T
    return TangentVector(M, Up, Vp, X)


def project_sparse_to_tangent(X: FixedRankMatrix, R: SamplingSet) -> TangentVector:
    """Orthogonal projection of a matrix supported on Omega onto the tangent space at X"""
    if R.shape != X.shape:
        raise ArgumentError(f'Sparse matrix shape {R.shape} does not match {X.shape}')
    Rv = sparse_times_dense(R, X.V)
    Ru = transpose_times_dense(R, X.U)
    M = X.U.T @ Rv
    Up = Rv - X.U @ M
    Vp = Ru - X.V @ M.T
    return TangentVector(M, Up, Vp, X)


def retract(X: FixedRankMatrix, xi: TangentVector, omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    """
    Metric projection of X + xi onto the manifold.

    Uses economic QR of Up and Vp and the SVD of the 2k x 2k core
    [[Sigma + M, Rv^T], [Ru, 0]]; machine epsilon is added to the retained
    singular values so the result always has rank k. The X_Omega cache is
    rebuilt for ``omega`` (defaults to the index set cached on X).
    """
    if xi.base.token is not X.token:
        raise BaseMismatchError('Tangent vector is not based at the point being retracted')
    k = X.k
    Qu, Ru = linalg.qr(xi.Up, mode='economic')
    Qv, Rv = linalg.qr(xi.Vp, mode='economic')
    S = np.block([
        [np.diag(X.sigma) + xi.M, Rv.T],
        [Ru, np.zeros((Ru.shape[0], Rv.shape[0]))],
    ])
    Us, s, Vsh = linalg.svd(S, lapack_driver='gesvd')
    U_new = np.hstack((X.U, Qu)) @ Us[:, :k]
    V_new = np.hstack((X.V, Qv)) @ Vsh[:k].T
    U_new, V_new = canonical_signs(U_new, V_new)
    return FixedRankMatrix(U_new, s[:k] + EPS, V_new, X.omega if omega is None else omega)


def transport(nu: TangentVector, X_plus: FixedRankMatrix) -> TangentVector:
    """
    Vector transport by orthogonal projection of nu (at X) onto the tangent
    space at X_plus, in factored form.
    """
    X = nu.base
    if X.shape != X_plus.shape or X.k != X_plus.k:
        raise ArgumentError(f'Cannot transport between {X.shape} rank {X.k} and {X_plus.shape} rank {X_plus.k}')
    U, V, M, Up, Vp = X.U, X.V, nu.M, nu.Up, nu.Vp
    U_plus, V_plus = X_plus.U, X_plus.V

    Av = V.T @ V_plus
    Au = U.T @ U_plus
    Bv = Vp.T @ V_plus
    Bu = Up.T @ U_plus

    M1 = Au.T @ M @ Av
    U1 = U @ (M @ Av)
    V1 = V @ (M.T @ Au)

    M2 = Bu.T @ Av
    U2 = Up @ Av
    V2 = V @ Bu

    M3 = Au.T @ Bv
    U3 = U @ Bv
    V3 = Vp @ Au

    M_plus = M1 + M2 + M3
    Up_plus = U1 + U2 + U3
    Up_plus = Up_plus - U_plus @ (U_plus.T @ Up_plus)
    Vp_plus = V1 + V2 + V3
    Vp_plus = Vp_plus - V_plus @ (V_plus.T @ Vp_plus)
    return TangentVector(M_plus, Up_plus, Vp_plus, X_plus)


def second_order_factors(X: FixedRankMatrix, xi: TangentVector) -> Tuple[np.ndarray, np.ndarray]:
    """Factors (Z_U, Z_V) of the second-order retraction, R2_X(xi) = Z_U Z_V^T"""
    k = X.k
    eye = np.eye(k)
    sinv = 1.0 / X.sigma
    M = xi.M
    SinvM = sinv[:, None] * M          # Sigma^-1 M
    MtSinv = M.T * sinv[None, :]       # M^T Sigma^-T
    Z_U = X.U @ (np.diag(X.sigma) + 0.5 * M - 0.125 * M @ SinvM) + xi.Up @ (eye - 0.5 * SinvM)
    Z_V = (X.V @ (eye + 0.5 * MtSinv - 0.125 * MtSinv @ MtSinv)
           + xi.Vp @ (np.diag(sinv) - 0.5 * sinv[:, None] * MtSinv))
    return Z_U, Z_V


def retract_second_order(X: FixedRankMatrix, xi: TangentVector,
                         omega: Optional[SamplingSet] = None) -> FixedRankMatrix:
    """
    Second-order retraction Z_U Z_V^T, re-factored to compact SVD form.

    Agrees with X + xi + Up Sigma^-1 Vp^T up to O(|xi|^3).

    Raises:
        RankDeficiencyError: the result has rank below k
    """
    if xi.base.token is not X.token:
        raise BaseMismatchError('Tangent vector is not based at the point being retracted')
    Z_U, Z_V = second_order_factors(X, xi)
    return compact_svd_of_product(Z_U, Z_V, X.k, X.omega if omega is None else omega)
