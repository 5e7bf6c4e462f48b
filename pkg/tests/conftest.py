"""
Shared fixtures and dense oracles for the lrgeomcg test suite
"""

import numpy as np
import pytest

from lrgeomcg.services.manifold import FixedRankMatrix, project_dense_to_tangent, random_point
from lrgeomcg.services.problems import make_random_problem
from lrgeomcg.services.sampling import sample_uniform


def orthonormal(rng, rows, cols):
    Q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q


def point_with_sigma(rng, m, n, sigma, omega=None):
    """Point with prescribed singular values and random subspaces"""
    sigma = np.asarray(sigma, dtype=float)
    k = sigma.size
    return FixedRankMatrix(orthonormal(rng, m, k), sigma, orthonormal(rng, n, k), omega)


def random_tangent(X, rng, norm=None):
    xi = project_dense_to_tangent(X, rng.standard_normal(X.shape))
    if norm is not None:
        xi = (norm / xi.norm()) * xi
    return xi


def dense_tangent_projection(X, Z):
    """P_U Z + Z P_V - P_U Z P_V"""
    PU = X.U @ X.U.T
    PV = X.V @ X.V.T
    return PU @ Z + Z @ PV - PU @ Z @ PV


def truncated_svd(Z, k):
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    return (U[:, :k] * s[:k]) @ Vt[:k]


def rel(a, b):
    """Relative Frobenius distance of two arrays"""
    scale = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / scale


@pytest.fixture
def rng():
    return np.random.default_rng(20120501)


@pytest.fixture
def small_point(rng):
    return random_point(9, 8, 3, rng)


@pytest.fixture
def small_data(rng):
    """Random values on 40 random entries of a 12 x 10 matrix"""
    omega = sample_uniform(12, 10, 40, rng, require_coverage=False)
    return omega.with_values(rng.standard_normal(len(omega)))


@pytest.fixture
def small_problem():
    return make_random_problem(40, 40, 2, 4.0, seed=7, with_test_set=True)
