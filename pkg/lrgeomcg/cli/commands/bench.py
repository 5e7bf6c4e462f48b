"""
Bench Command
Runs an experiment spec file and writes its CSVs
"""

from lrgeomcg.cli import Command
from lrgeomcg.services.experiments import ExperimentSpec, run_experiment

bench_command = Command('bench', 'Run an experiment spec (key = value file)')


@bench_command.arguments
def configure(parser):
    parser.add_argument('spec', help='Experiment spec file')
    parser.add_argument('--out', help='Output directory (overrides the spec)')
    parser.add_argument('--workers', type=int, help='Worker pool size (overrides the spec)')


@bench_command.action
def bench(args):
    spec = ExperimentSpec.from_file(args.spec)
    result = run_experiment(spec, args.out, args.workers)
    return {
        'experiment': spec.name,
        'rows': len(result.rows),
        'failures': result.failures,
        'summary': str(result.summary_path),
        'traces': [str(path) for path in result.trace_paths],
    }
