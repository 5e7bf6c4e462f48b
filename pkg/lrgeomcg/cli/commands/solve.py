"""
Solve Command
Runs geometric CG (optionally after ALS sweeps) on a sample file
"""

import logging
from pathlib import Path

from lrgeomcg.cli import Command, parse_assignments
from lrgeomcg.config import get_config
from lrgeomcg.exceptions import ArgumentError
from lrgeomcg.services.baseline_als import solve_hybrid
from lrgeomcg.services.cg_solver import GeomCGSolver, SolverConfig
from lrgeomcg.services.metrics import solution_metrics
from lrgeomcg.services.problems import CompletionProblem, random_start
from lrgeomcg.utils.formats import load_factors, load_ground_truth, read_samples, save_factors, write_trace

# Configure logging
logger = logging.getLogger(__name__)

solve_command = Command('solve', 'Complete a sample file at a fixed rank')


@solve_command.arguments
def configure(parser):
    profile = get_config()
    parser.add_argument('samples', help='Sample file (m n nnz header, 1-based triplets)')
    parser.add_argument('--rank', type=int, required=True)
    parser.add_argument('--seed', type=int, default=0, help='Seed of the random initial guess')
    parser.add_argument('--test', help='Held-out sample file')
    parser.add_argument('--truth', help='Ground-truth archive (.npz)')
    parser.add_argument('--als-sweeps', type=int, default=0, help='ALS sweeps before CG')
    parser.add_argument('--init', help='Factor archive (.npz) to start CG from instead of a random point')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='Solver option override, repeatable')
    parser.add_argument('--out', default=profile.OUTPUT_DIR, help='Output directory')
    parser.add_argument('--record-timing', action='store_true', default=profile.RECORD_TIMING)


@solve_command.action
def solve(args):
    cfg = SolverConfig.from_overrides(parse_assignments(args.set))
    A_omega = read_samples(args.samples)
    test_set = read_samples(args.test) if args.test else None
    truth = load_ground_truth(args.truth) if args.truth else None
    if test_set is not None and test_set.shape != A_omega.shape:
        raise ArgumentError(f'Test set shape {test_set.shape} does not match {A_omega.shape}')
    problem = CompletionProblem(A_omega.m, A_omega.n, args.rank, A_omega, test_set, truth)

    if args.init and args.als_sweeps:
        raise ArgumentError('--init and --als-sweeps are mutually exclusive')
    if args.init:
        X1 = load_factors(args.init, A_omega)
        if X1.shape != problem.shape or X1.k != args.rank:
            raise ArgumentError(f'Initial factors {X1.shape} rank {X1.k} do not match {problem.shape} rank {args.rank}')
        X, trace = GeomCGSolver(cfg).solve(problem, X1)
    elif args.als_sweeps:
        X, trace = solve_hybrid(problem, args.als_sweeps, cfg, args.seed)
    else:
        X, trace = GeomCGSolver(cfg).solve(problem, random_start(problem, args.seed))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    factors_path = out / 'factors.npz'
    trace_path = out / 'trace.csv'
    save_factors(factors_path, X)
    write_trace(trace_path, trace, args.record_timing)
    logger.info(f"Solution written to {out}")

    return {
        'metrics': solution_metrics(problem, X, trace, args.record_timing),
        'files': {'factors': str(factors_path), 'trace': str(trace_path)},
    }
