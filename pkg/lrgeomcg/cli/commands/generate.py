"""
Generate Command
Writes a completion problem: observed samples, a test set and the ground truth
"""

import logging
from pathlib import Path

from lrgeomcg.cli import Command
from lrgeomcg.config import get_config
from lrgeomcg.services.problems import make_bivariate_problem, make_random_problem, oversampling_size
from lrgeomcg.utils.formats import save_ground_truth, write_samples

# Configure logging
logger = logging.getLogger(__name__)

generate_command = Command('generate', 'Write a random or bivariate completion problem')


@generate_command.arguments
def configure(parser):
    profile = get_config()
    parser.add_argument('--kind', choices=['random', 'bivariate'], default='random')
    parser.add_argument('--m', type=int, help='Rows (defaults to --n)')
    parser.add_argument('--n', type=int, help='Columns')
    parser.add_argument('--k', type=int, help='Rank of the random ground truth')
    parser.add_argument('--os', type=float, help='Oversampling factor')
    parser.add_argument('--noise', type=float, default=0.0, help='Noise level epsilon')
    parser.add_argument('--sigma', type=float, default=profile.BIVARIATE_SIGMA)
    parser.add_argument('--reference-rank', type=int, default=profile.BIVARIATE_REFERENCE_RANK)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', default=profile.OUTPUT_DIR, help='Output directory')


@generate_command.action
def generate(args):
    profile = get_config()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.kind == 'random':
        n = args.n or profile.DEFAULT_SIZE
        m = args.m or n
        k = args.k or profile.DEFAULT_RANK
        os_factor = args.os or profile.DEFAULT_OVERSAMPLING
        problem = make_random_problem(m, n, k, os_factor, args.seed, noise=args.noise, with_test_set=True)
    else:
        n = args.n or profile.BIVARIATE_SIZE
        os_factor = args.os or profile.BIVARIATE_OVERSAMPLING
        size = oversampling_size(n, n, args.reference_rank, os_factor)
        problem = make_bivariate_problem(n, args.sigma, args.reference_rank, size, args.seed)

    paths = {
        'samples': out / 'train.txt',
        'test': out / 'test.txt',
        'truth': out / 'truth.npz',
    }
    write_samples(paths['samples'], problem.A_omega)
    write_samples(paths['test'], problem.test_set)
    save_ground_truth(paths['truth'], problem.ground_truth)
    logger.info(f"Generated {args.kind} problem {problem.m}x{problem.n} in {out}")
    return {
        'm': problem.m,
        'n': problem.n,
        'k': problem.k,
        'omega_size': len(problem.A_omega),
        'files': {key: str(path) for key, path in paths.items()},
    }
