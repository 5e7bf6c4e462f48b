import numpy as np
import pytest

from conftest import point_with_sigma, random_tangent, rel
from lrgeomcg.exceptions import ArgumentError
from lrgeomcg.services.manifold import inner, random_point, retract, retract_second_order, tangent_axpy, zero_vector
from lrgeomcg.services.objective import (
    ObjectiveContext,
    cost_f,
    cost_g,
    error_split,
    hessian_apply,
    riemannian_gradient,
)
from lrgeomcg.services.sampling import residual_on_omega, sample_uniform


def _setup(rng, m=12, n=10, k=2, size=60):
    omega = sample_uniform(m, n, size, rng, require_coverage=False)
    X = random_point(m, n, k, rng, omega)
    A_omega = omega.with_values(rng.standard_normal(size))
    return X, ObjectiveContext(A_omega)


def test_context_validation(rng):
    omega = sample_uniform(5, 5, 10, rng, require_coverage=False)
    with pytest.raises(ArgumentError):
        ObjectiveContext(omega)
    with pytest.raises(ArgumentError):
        ObjectiveContext(omega.with_values(np.ones(10)), mu=1.5)
    with pytest.raises(ArgumentError):
        ObjectiveContext(omega.with_values(np.ones(10)), mu=-0.1)


def test_cost_vanishes_on_agreeing_data(rng):
    omega = sample_uniform(12, 10, 60, rng, require_coverage=False)
    X = random_point(12, 10, 2, rng, omega)
    ctx = ObjectiveContext(omega.with_values(X.omega_values))
    assert cost_f(X, ctx) == 0.0
    assert riemannian_gradient(X, ctx).norm() == 0.0


def test_cost_with_zero_data(rng):
    omega = sample_uniform(12, 10, 60, rng, require_coverage=False)
    X = random_point(12, 10, 2, rng, omega)
    ctx = ObjectiveContext(omega.with_values(np.zeros(60)))
    assert cost_f(X, ctx) == pytest.approx(0.5 * np.sum(X.omega_values ** 2), rel=1e-14)


def test_cost_matches_dense(rng):
    X, ctx = _setup(rng)
    omega = ctx.A_omega
    diff = omega.gather(X.to_dense()) - omega.values
    assert cost_f(X, ctx) == pytest.approx(0.5 * np.dot(diff, diff), rel=1e-12)


def test_gradient_is_projected_euclidean_gradient(rng):
    X, ctx = _setup(rng)
    grad = riemannian_gradient(X, ctx)
    R = residual_on_omega(X, ctx.A_omega).to_dense()
    for _ in range(5):
        xi = random_tangent(X, rng)
        assert inner(grad, xi) == pytest.approx(np.vdot(R, xi.to_dense()), rel=1e-10)
    assert grad.tangency_error() < 1e-10


def test_gradient_directional_derivative(rng):
    X, ctx = _setup(rng)
    grad = riemannian_gradient(X, ctx)
    xi = random_tangent(X, rng, norm=1.0)
    t = 1e-5
    fd = (cost_f(retract(X, t * xi), ctx) - cost_f(retract(X, -t * xi), ctx)) / (2 * t)
    expected = inner(grad, xi)
    assert abs(fd - expected) <= 1e-6 * max(1.0, abs(expected))


def test_regularizer_gradient_vanishes_at_unit_spectrum(rng):
    omega = sample_uniform(12, 10, 60, rng, require_coverage=False)
    X = point_with_sigma(rng, 12, 10, [1.0, 1.0, 1.0], omega)
    A_omega = omega.with_values(rng.standard_normal(60))
    plain = riemannian_gradient(X, ObjectiveContext(A_omega))
    regularized = riemannian_gradient(X, ObjectiveContext(A_omega, mu=0.3))
    assert np.array_equal(plain.M, regularized.M)


def test_regularized_gradient_directional_derivative(rng):
    X, ctx = _setup(rng)
    ctx = ObjectiveContext(ctx.A_omega, mu=0.5)
    grad = riemannian_gradient(X, ctx)
    xi = random_tangent(X, rng, norm=1.0)
    t = 1e-5
    fd = (cost_g(retract(X, t * xi), ctx) - cost_g(retract(X, -t * xi), ctx)) / (2 * t)
    expected = inner(grad, xi)
    assert abs(fd - expected) <= 1e-6 * max(1.0, abs(expected))


def test_cost_g_reduces_to_f_without_regularization(rng):
    X, ctx = _setup(rng)
    assert cost_g(X, ctx) == cost_f(X, ctx)


def test_cost_g_at_unit_spectrum_and_exact_fit(rng):
    omega = sample_uniform(12, 10, 60, rng, require_coverage=False)
    X = point_with_sigma(rng, 12, 10, [1.0, 1.0, 1.0], omega)
    ctx = ObjectiveContext(omega.with_values(X.omega_values), mu=0.2)
    assert cost_g(X, ctx) == pytest.approx(6 * 0.2 ** 2, rel=1e-14)


def test_cost_g_matches_dense_pseudo_inverse(rng):
    X, ctx = _setup(rng)
    ctx = ObjectiveContext(ctx.A_omega, mu=0.1)
    Xd = X.to_dense()
    Xp = np.linalg.pinv(Xd, rcond=1e-10)
    expected = cost_f(X, ctx) + 0.1 ** 2 * (np.sum(Xp ** 2) + np.sum(Xd ** 2))
    assert cost_g(X, ctx) == pytest.approx(expected, rel=1e-10)


def test_hessian_of_zero_is_zero(rng):
    X, ctx = _setup(rng)
    assert hessian_apply(X, zero_vector(X), ctx).norm() == 0.0


def test_hessian_is_symmetric_and_linear(rng):
    for _ in range(20):
        X, ctx = _setup(rng, m=int(rng.integers(8, 20)), n=int(rng.integers(8, 20)),
                        k=int(rng.integers(1, 4)), size=50)
        xi, eta = random_tangent(X, rng), random_tangent(X, rng)
        lhs = inner(hessian_apply(X, xi, ctx), eta)
        rhs = inner(xi, hessian_apply(X, eta, ctx))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)

        combo = hessian_apply(X, tangent_axpy(1.5, xi, eta), ctx)
        parts = tangent_axpy(1.5, hessian_apply(X, xi, ctx), hessian_apply(X, eta, ctx))
        assert rel(combo.to_dense(), parts.to_dense()) < 1e-12


def test_hessian_quadratic_form(rng):
    X, ctx = _setup(rng)
    xi = random_tangent(X, rng)
    omega = ctx.A_omega
    S = omega.gather(xi.to_dense())
    R = residual_on_omega(X, omega).to_dense()
    normal = xi.Up @ np.diag(1.0 / X.sigma) @ xi.Vp.T
    expected = np.dot(S, S) + 2.0 * np.vdot(R, normal)
    assert inner(hessian_apply(X, xi, ctx), xi) == pytest.approx(expected, rel=1e-10)


def test_hessian_rejects_regularized_objective(rng):
    X, ctx = _setup(rng)
    with pytest.raises(ArgumentError):
        hessian_apply(X, zero_vector(X), ObjectiveContext(ctx.A_omega, mu=0.1))


def test_second_order_model_of_cost(rng):
    omega = sample_uniform(12, 10, 80, rng, require_coverage=False)
    X = point_with_sigma(rng, 12, 10, [4.0, 2.0], omega)
    ctx = ObjectiveContext(omega.with_values(rng.standard_normal(80)))
    xi = random_tangent(X, rng, norm=1.0)
    f0 = cost_f(X, ctx)
    slope = inner(riemannian_gradient(X, ctx), xi)
    curvature = inner(hessian_apply(X, xi, ctx), xi)
    ts = np.array([1e-1, 3e-2, 1e-2, 3e-3])
    remainders = [abs(cost_f(retract_second_order(X, t * xi), ctx) - (f0 + t * slope + 0.5 * t ** 2 * curvature))
                  for t in ts]
    fitted = np.polyfit(np.log10(ts), np.log10(remainders), 1)[0]
    assert fitted == pytest.approx(3.0, abs=0.3)


def test_error_split(rng):
    X, ctx = _setup(rng)
    e1, e2 = error_split(X, ctx)
    R = residual_on_omega(X, ctx.A_omega)
    assert e1 ** 2 + e2 ** 2 == pytest.approx(R.norm() ** 2, rel=1e-12)
    assert e1 == pytest.approx(riemannian_gradient(X, ctx).norm(), rel=1e-14)


def test_error_split_of_exact_fit(rng):
    omega = sample_uniform(12, 10, 60, rng, require_coverage=False)
    X = random_point(12, 10, 2, rng, omega)
    assert error_split(X, ObjectiveContext(omega.with_values(X.omega_values))) == (0.0, 0.0)
