"""
Rho Command
Convergence factor of a trace CSV
"""

from lrgeomcg.cli import Command
from lrgeomcg.services.cg_solver import TERMINATION_REASONS
from lrgeomcg.services.metrics import convergence_factor_from, iterations_per_decade
from lrgeomcg.utils.formats import read_trace, residuals_from_trace

rho_command = Command('rho', 'Convergence factor of a solver trace')


@rho_command.arguments
def configure(parser):
    parser.add_argument('trace', help='Trace CSV written by solve or bench')
    parser.add_argument('--termination', choices=TERMINATION_REASONS,
                        help='Termination reason of the run; max-iters yields rho = 1')


@rho_command.action
def rho(args):
    rows = read_trace(args.trace)
    factor = convergence_factor_from(residuals_from_trace(rows), args.termination)
    return {
        'rho': factor.value,
        'note': factor.note,
        'iterations': len(rows),
        'iterations_per_decade': iterations_per_decade(factor).value,
    }
