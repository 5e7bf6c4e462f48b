"""
Desk-scale reproductions of the benchmark behaviour: iteration counts, noise
floors, oversampling trends, regularized bounds, homotopy and hybrid runs
"""

import numpy as np
import pytest

from lrgeomcg.services import metrics
from lrgeomcg.services.baseline_als import solve_hybrid
from lrgeomcg.services.cg_solver import RESIDUAL_TOL, GRADIENT_TOL, GeomCGSolver, SolverConfig
from lrgeomcg.services.experiments import ExperimentSpec, run_experiment
from lrgeomcg.services.problems import make_random_problem, random_start

pytestmark = pytest.mark.slow

SEEDS = range(10)


def _solve(n, k, os_factor, seed, cfg=None, noise=0.0):
    problem = make_random_problem(n, n, k, os_factor, seed, noise=noise)
    X, trace = GeomCGSolver(cfg or SolverConfig()).solve(problem, random_start(problem, seed))
    return problem, X, trace


def test_iteration_counts_and_armijo_behaviour():
    iterations = []
    accepted = steps = 0
    for seed in SEEDS:
        _, _, trace = _solve(1000, 40, 3.0, seed)
        assert trace.termination_reason in (RESIDUAL_TOL, GRADIENT_TOL)
        iterations.append(trace.iterations)
        stepped = [r for r in trace.cg_records() if r.stepped]
        accepted += sum(r.backtracks == 0 for r in stepped)
        steps += len(stepped)
    assert 38 <= np.mean(iterations) <= 71
    assert accepted / steps >= 0.95


def test_lower_rank_iteration_count():
    _, _, trace = _solve(1000, 10, 3.0, 0)
    assert trace.termination_reason in (RESIDUAL_TOL, GRADIENT_TOL)
    assert 80 <= trace.iterations <= 170


def _affine_fit_quality(trace, start=10):
    residuals = trace.residuals()
    its = np.array([i for i in sorted(residuals) if i >= start], dtype=float)
    logs = np.log10([residuals[int(i)] for i in its])
    slope, intercept = np.polyfit(its, logs, 1)
    fitted = slope * its + intercept
    return slope, 1.0 - np.sum((logs - fitted) ** 2) / np.sum((logs - logs.mean()) ** 2)


@pytest.mark.parametrize('seed', [0, 1])
def test_residual_decays_linearly_after_the_transient(seed):
    _, _, trace = _solve(1000, 10, 3.0, seed)
    assert trace.termination_reason in (RESIDUAL_TOL, GRADIENT_TOL)
    slope, r2 = _affine_fit_quality(trace)
    assert slope < 0
    assert r2 >= 0.98


def test_beta_settles_in_the_tail():
    betas = []
    for seed in range(3):
        _, _, trace = _solve(1600, 40, 3.0, seed)
        assert all(r.beta >= 0 for r in trace.cg_records() if r.stepped)
        betas.append(metrics.tail_mean_beta(trace).value)
    assert 0.2 <= float(np.median(betas)) <= 0.6


def test_iteration_cost_scales_with_work_units():
    costs = []
    for n in (1000, 2000, 4000):
        problem, _, trace = _solve(n, 10, 3.0, 0, SolverConfig(max_iters=60))
        costs.append(metrics.ns_per_work_unit(trace, problem).value)
    assert max(costs) <= 3.0 * min(costs)


@pytest.mark.parametrize('epsilon', [1e-2, 1e-4, 1e-6, 1e-8])
def test_noise_floors(epsilon):
    cfg = SolverConfig(stagnation=True)
    hits = 0
    for seed in SEEDS:
        problem, X, _ = _solve(1000, 20, 3.0, seed, cfg, noise=epsilon)
        residual = metrics.relative_residual(X, problem.A_omega).value
        error = metrics.relative_error(X, problem.ground_truth).value
        hits += 0.4 * epsilon <= residual <= 2 * epsilon and 0.4 * epsilon <= error <= 2 * epsilon
    assert hits >= 9


def test_convergence_factor_decreases_with_oversampling():
    medians = []
    for os_factor in (2.5, 3.0, 5.0, 8.0, 12.0):
        rhos = []
        for seed in range(5):
            _, _, trace = _solve(500, 10, os_factor, seed)
            rhos.append(metrics.convergence_factor(trace).value)
        medians.append(float(np.median(rhos)))
    assert all(b < a for a, b in zip(medians, medians[1:]))
    assert medians[-1] < medians[1] - 0.05


def test_regularized_run_keeps_bounds():
    # the solver raises InvariantViolation if a bound breaks
    _, _, trace = _solve(1000, 40, 3.0, 0, SolverConfig(mu=1e-4, assert_bounds=True, max_iters=300))
    assert trace.iterations > 1


def test_homotopy_beats_random_restarts(tmp_path):
    spec = ExperimentSpec.from_text(
        'kind = homotopy\nname = hom\nsizes = 200\nsigma = 1\nranks = 1,2,3,4,5,6,7,8,9,10,11,12\n'
        'reference_rank = 10\nreference_os = 8\nseeds = 1, 2\n'
    )
    rows = run_experiment(spec, str(tmp_path), workers=2).rows
    for seed in (1, 2):
        hom = {row['k']: row['test_error'] for row in rows if row['seed'] == seed and row['strategy'] == 'hom'}
        fresh = {row['k']: row['test_error'] for row in rows if row['seed'] == seed and row['strategy'] == 'no-hom'}
        ranks = sorted(hom)
        assert all(hom[b] <= hom[a] + 1e-10 for a, b in zip(ranks, ranks[1:]))
        assert all(hom[k] <= fresh[k] for k in ranks if k >= 5)


def test_hybrid_needs_fewer_iterations():
    wins = 0
    for seed in SEEDS:
        problem = make_random_problem(1600, 1600, 40, 3.0, seed)
        _, plain = GeomCGSolver(SolverConfig()).solve(problem, random_start(problem, seed))
        _, hybrid = solve_hybrid(problem, 20, SolverConfig(), seed)
        assert hybrid.converged
        wins += hybrid.als_sweeps + hybrid.iterations < plain.iterations
    assert wins >= 7
