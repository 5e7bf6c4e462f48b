import numpy as np
import pytest

from conftest import rel
from lrgeomcg.exceptions import ArgumentError
from lrgeomcg.services.baseline_als import (
    FactorPair,
    als_objective,
    als_sweep,
    solve_hybrid,
    swamp_ratio,
    to_fixed_rank,
    update_left,
    update_right,
)
from lrgeomcg.services.cg_solver import SolverConfig, solve
from lrgeomcg.services.manifold import random_point
from lrgeomcg.services.problems import STREAM_INIT, random_start, substream
from lrgeomcg.services.sampling import SamplingSet, apply_proj_omega_lowrank, sample_uniform


def test_zero_data_gives_zero_factors(rng):
    omega = sample_uniform(10, 8, 40, rng)
    A_omega = omega.with_values(np.zeros(40))
    F = als_sweep(FactorPair.random(10, 8, 2, rng), A_omega)
    assert np.all(F.L == 0.0) or np.all(F.R == 0.0)
    assert als_objective(F, A_omega) == 0.0


def test_exact_rank_one_fit(rng):
    u = rng.standard_normal(6)
    v = rng.standard_normal(5)
    omega = SamplingSet.from_linear(6, 5, np.arange(30))
    A_omega = omega.with_values(np.outer(u, v).ravel())
    F = als_sweep(FactorPair.random(6, 5, 1, rng), A_omega)
    assert rel(F.L @ F.R.T, np.outer(u, v)) < 1e-12


def test_half_sweeps_never_increase_the_objective(small_problem, rng):
    A_omega = small_problem.A_omega
    F = FactorPair.random(40, 40, 2, rng)
    previous = als_objective(F, A_omega)
    for _ in range(5):
        for update in (update_right, update_left):
            F = update(F, A_omega)
            current = als_objective(F, A_omega)
            assert current <= previous * (1 + 1e-12)
            previous = current


def test_update_right_matches_dense_least_squares(rng):
    omega = sample_uniform(9, 7, 40, rng)
    A_omega = omega.with_values(rng.standard_normal(40))
    F = FactorPair.random(9, 7, 2, rng)
    R = update_right(F, A_omega).R
    for j in range(7):
        mask = omega.cols == j
        expected, *_ = np.linalg.lstsq(F.L[omega.rows[mask]], A_omega.values[mask], rcond=None)
        np.testing.assert_allclose(R[j], expected, rtol=1e-9, atol=1e-12)


def test_ridge_and_shape_checks(rng):
    omega = sample_uniform(9, 7, 40, rng)
    A_omega = omega.with_values(rng.standard_normal(40))
    with pytest.raises(ArgumentError):
        update_left(FactorPair.random(9, 7, 2, rng), A_omega, ridge=-1.0)
    with pytest.raises(ArgumentError):
        update_left(FactorPair.random(7, 9, 2, rng), A_omega)
    with pytest.raises(ArgumentError):
        FactorPair(np.ones((3, 2)), np.ones((4, 3)))


def test_singular_systems_are_bumped(rng):
    # every observed entry of column 0 sits in row 0, where L is zero
    omega = SamplingSet.from_triplets(3, 2, [0, 1, 2], [0, 1, 1], [1.0, 2.0, 3.0])
    L = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    F = update_right(FactorPair(L, np.ones((2, 2))), omega)
    assert F.ridge_bumps == 1
    assert np.all(np.isfinite(F.R))


def test_ridge_objective(rng):
    F = FactorPair(np.ones((2, 1)), np.ones((3, 1)))
    omega = SamplingSet.from_triplets(2, 3, [0], [0], [1.0])
    assert als_objective(F, omega) == 0.0
    assert als_objective(F, omega, ridge=0.5) == pytest.approx(2.5)


def test_conversion_preserves_the_product(rng):
    F = FactorPair.random(12, 9, 3, rng)
    X = to_fixed_rank(F)
    assert rel(X.to_dense(), F.L @ F.R.T) < 1e-12
    assert np.all(np.diff(X.sigma) <= 0)


def test_random_factors_match_random_point():
    F = FactorPair.random(12, 9, 3, 5)
    X = random_point(12, 9, 3, 5)
    assert rel(to_fixed_rank(F).to_dense(), X.to_dense()) < 1e-12


def test_hybrid_without_sweeps_is_plain_cg(small_problem):
    cfg = SolverConfig(max_iters=20)
    X_h, trace_h = solve_hybrid(small_problem, 0, cfg, seed=4)
    X_c, trace_c = solve(small_problem, cfg, random_start(small_problem, 4))
    assert trace_h.als_sweeps == 0
    assert [r.cost for r in trace_h.records] == pytest.approx([r.cost for r in trace_c.records], rel=1e-12)
    assert rel(X_h.to_dense(), X_c.to_dense()) < 1e-12


def test_hybrid_records_both_phases(small_problem):
    X, trace = solve_hybrid(small_problem, 3, SolverConfig(max_iters=500), seed=4)
    phases = [r.phase for r in trace.records]
    assert phases[:3] == ['als'] * 3
    assert set(phases[3:]) == {'cg'}
    assert trace.als_sweeps == 3
    assert trace.converged
    assert rel(X.to_dense(), small_problem.ground_truth.to_dense()) < 1e-8


@pytest.mark.parametrize('sweeps', [3, 5, 10])
@pytest.mark.parametrize('seed', [2, 4, 6])
def test_hybrid_converges_after_short_als_phase(small_problem, sweeps, seed):
    X, trace = solve_hybrid(small_problem, sweeps, SolverConfig(max_iters=1000), seed=seed)
    assert trace.als_sweeps == sweeps
    assert trace.converged
    assert rel(X.to_dense(), small_problem.ground_truth.to_dense()) < 1e-8


def test_swamped_als_phase_restarts_with_ridge(small_problem):
    _, trace = solve_hybrid(small_problem, 10, SolverConfig(max_iters=1000), seed=4)
    assert any(event.startswith('als-swamp@') for event in trace.events)
    assert sum(r.phase == 'als' for r in trace.records) == 10
    assert trace.converged


def test_swamp_ratio_of_the_truth_is_near_one(small_problem):
    truth = small_problem.ground_truth
    F = FactorPair(truth.L, truth.R)
    fitted = apply_proj_omega_lowrank(F.L, F.R, small_problem.A_omega)
    assert abs(swamp_ratio(F, fitted, small_problem.A_omega) - 1.0) < 0.2


def test_hybrid_rejects_negative_sweeps(small_problem):
    with pytest.raises(ArgumentError):
        solve_hybrid(small_problem, -1, SolverConfig(), seed=0)


def test_init_stream_is_shared(small_problem):
    F = FactorPair.random(40, 40, 2, substream(4, STREAM_INIT))
    assert rel(to_fixed_rank(F).to_dense(), random_start(small_problem, 4).to_dense()) < 1e-12
