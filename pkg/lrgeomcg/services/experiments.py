"""
Experiment Service
Expands experiment specs into seeded grid points, runs them in a worker pool
and writes summary and trace CSVs
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from typing_extensions import Literal

from lrgeomcg.config import Config, get_config
from lrgeomcg.exceptions import SpecError
from lrgeomcg.services.baseline_als import solve_hybrid
from lrgeomcg.services.cg_solver import GeomCGSolver, SolverConfig, SolverTrace
from lrgeomcg.services.manifold import FixedRankMatrix
from lrgeomcg.services.metrics import solution_metrics
from lrgeomcg.services.problems import (
    STREAM_HOMOTOPY,
    homotopy_init,
    make_bivariate_problem,
    make_random_problem,
    oversampling_size,
    random_start,
    substream,
)
from lrgeomcg.utils.formats import write_summary, write_trace
from lrgeomcg.utils.validators import parse_spec_text, validate_spec

# Configure logging
logger = logging.getLogger(__name__)

ExperimentKind = Literal['single', 'size-sweep', 'rank-sweep', 'os-sweep', 'noise-sweep', 'hybrid', 'homotopy']

SUMMARY_COLUMNS = [
    'kind', 'strategy', 'm', 'n', 'k', 'os', 'noise', 'sweeps', 'seed',
    'omega_size', 'iterations', 'als_sweeps', 'iteration_equivalents', 'termination',
    'rel_residual', 'rel_residual_clean', 'rel_error', 'test_error', 'e1', 'e2', 'e3',
    'rho', 'iterations_per_decade', 'beta_tail_mean', 'armijo_zero_fraction', 'events', 'error',
]
TIMING_COLUMNS = ['ns_per_work_unit']

# Solver defaults layered under spec overrides for noisy and decaying-spectrum runs
STAGNATION_DEFAULTS = {'stagnation': 'true'}
HOMOTOPY_DEFAULTS = {'stagnation': 'true', 'max_iters': '500'}

# Largest bivariate size kept as a dense ground truth
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class GridPoint:
    """One (problem, strategy, seed) cell of an experiment grid"""
    index: int
    n: int
    k: int
    os: float
    noise: float
    sweeps: Optional[int]
    seed: int
    strategy: str = 'cg'


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment: kind, parameter grids, seeds and solver overrides"""
    kind: ExperimentKind
    seeds: Tuple[int, ...]
    sizes: Tuple[int, ...]
    ranks: Tuple[int, ...]
    os: Tuple[float, ...]
    noise: Tuple[float, ...] = (0.0,)
    sweeps: Tuple[int, ...] = (0,)
    sigma: float = Config.BIVARIATE_SIGMA
    reference_rank: int = Config.BIVARIATE_REFERENCE_RANK
    reference_os: float = Config.BIVARIATE_OVERSAMPLING
    name: str = 'experiment'
    output: str = Config.OUTPUT_DIR
    traces: bool = False
    record_timing: bool = Config.RECORD_TIMING
    workers: int = Config.WORKERS
    solver: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> 'ExperimentSpec':
        """Build a spec from a parsed mapping; profile defaults fill omitted grids"""
        data = validate_spec(dict(data))
        profile = get_config()
        kind = data['kind']
        homotopy = kind == 'homotopy'
        sizes = data.get('sizes', [profile.BIVARIATE_SIZE if homotopy else profile.DEFAULT_SIZE])
        ranks = data.get('ranks', list(range(1, 13)) if homotopy else [profile.DEFAULT_RANK])
        defaults = HOMOTOPY_DEFAULTS if homotopy else STAGNATION_DEFAULTS if kind == 'noise-sweep' else {}
        spec = cls(
            kind=kind,
            seeds=tuple(data['seeds']),
            sizes=tuple(sizes),
            ranks=tuple(sorted(ranks)) if homotopy else tuple(ranks),
            os=tuple(data.get('os', [profile.DEFAULT_OVERSAMPLING])),
            noise=tuple(data.get('noise', [0.0])),
            sweeps=tuple(data.get('sweeps', [0])),
            sigma=data.get('sigma', profile.BIVARIATE_SIGMA),
            reference_rank=data.get('reference_rank', profile.BIVARIATE_REFERENCE_RANK),
            reference_os=data.get('reference_os', profile.BIVARIATE_OVERSAMPLING),
            name=data.get('name', kind),
            output=data.get('output', profile.OUTPUT_DIR),
            traces=data.get('traces', False),
            record_timing=data.get('record_timing', profile.RECORD_TIMING),
            workers=data.get('workers', profile.WORKERS),
            solver={**defaults, **data.get('solver', {})},
        )
        spec.solver_config()
        return spec

    @classmethod
    def from_text(cls, text: str) -> 'ExperimentSpec':
        return cls.from_mapping(parse_spec_text(text))

    @classmethod
    def from_file(cls, path) -> 'ExperimentSpec':
        with open(path) as f:
            return cls.from_text(f.read())

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig.from_overrides(self.solver)
        except ValueError as e:
            raise SpecError(f'solver: {e}') from e

    def grid(self) -> List[GridPoint]:
        """Grid points in canonical order: sizes, ranks, os, noise, sweeps, seeds"""
        points: List[GridPoint] = []
        if self.kind == 'homotopy':
            for n in self.sizes:
                for seed in self.seeds:
                    for strategy in ('hom', 'no-hom'):
                        points.append(GridPoint(len(points), n, max(self.ranks), self.reference_os,
                                                0.0, None, seed, strategy))
            return points
        sweeps = self.sweeps if self.kind == 'hybrid' else (None,)
        strategy = 'hybrid' if self.kind == 'hybrid' else 'cg'
        for n in self.sizes:
            for k in self.ranks:
                for os_factor in self.os:
                    for noise in self.noise:
                        for count in sweeps:
                            for seed in self.seeds:
                                points.append(GridPoint(len(points), n, k, os_factor, noise,
                                                        count, seed, strategy))
        return points


@dataclass
class ExperimentResult:
    rows: List[Dict[str, Any]]
    summary_path: Optional[Path] = None
    trace_paths: List[Path] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for row in self.rows if row.get('error'))


class ExperimentService:
    """Runs experiment grids; every grid point is independent and seed-deterministic"""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.cfg = spec.solver_config()
        self.solver = GeomCGSolver(self.cfg)

    def _base_row(self, point: GridPoint, k: int) -> Dict[str, Any]:
        return {
            'kind': self.spec.kind, 'strategy': point.strategy, 'm': point.n, 'n': point.n, 'k': k,
            'os': point.os, 'noise': point.noise, 'sweeps': point.sweeps, 'seed': point.seed,
        }

    def _run_random(self, point: GridPoint) -> List[Tuple[Dict[str, Any], Optional[SolverTrace]]]:
        row = self._base_row(point, point.k)
        try:
            problem = make_random_problem(point.n, point.n, point.k, point.os, point.seed,
                                          noise=point.noise, with_test_set=True)
            row['omega_size'] = len(problem.A_omega)
            if point.sweeps is not None:
                X, trace = solve_hybrid(problem, point.sweeps, self.cfg, point.seed)
            else:
                X, trace = self.solver.solve(problem, random_start(problem, point.seed))
            row.update(solution_metrics(problem, X, trace, self.spec.record_timing))
            return [(row, trace)]
        except Exception as e:
            logger.error(f"Grid point {point.index} failed: {e}")
            row['error'] = f'{type(e).__name__}: {e}'
            return [(row, None)]

    def _run_homotopy(self, point: GridPoint) -> List[Tuple[Dict[str, Any], Optional[SolverTrace]]]:
        """Rank continuation over all ranks of the spec for one seed and strategy"""
        results = []
        base = None
        X_prev: Optional[FixedRankMatrix] = None
        for k in self.spec.ranks:
            row = self._base_row(point, k)
            try:
                if base is None:
                    size = oversampling_size(point.n, point.n, self.spec.reference_rank, self.spec.reference_os)
                    base = make_bivariate_problem(point.n, self.spec.sigma, k, size, point.seed,
                                                  dense=point.n <= DENSE_LIMIT)
                problem = base.with_rank(k)
                row['omega_size'] = len(problem.A_omega)
                if point.strategy == 'hom' and X_prev is not None and X_prev.k == k - 1:
                    X1 = homotopy_init(X_prev, substream(point.seed, STREAM_HOMOTOPY * 1000 + k))
                else:
                    X1 = random_start(problem, point.seed * 1000 + k)
                X, trace = self.solver.solve(problem, X1)
                X_prev = X
                row.update(solution_metrics(problem, X, trace, self.spec.record_timing))
                results.append((row, trace))
            except Exception as e:
                logger.error(f"Homotopy {point.strategy} rank {k} (seed {point.seed}) failed: {e}")
                row['error'] = f'{type(e).__name__}: {e}'
                X_prev = None
                results.append((row, None))
        return results

    def run_point(self, point: GridPoint) -> List[Tuple[Dict[str, Any], Optional[SolverTrace]]]:
        if self.spec.kind == 'homotopy':
            return self._run_homotopy(point)
        return self._run_random(point)

    def run_experiment(self, output_dir: Optional[str] = None, workers: Optional[int] = None) -> ExperimentResult:
        """Run every grid point and write ``<name>_summary.csv`` (plus traces when enabled)"""
        spec = self.spec
        points = spec.grid()
        workers = workers or spec.workers
        logger.info(f"Running {spec.kind} experiment '{spec.name}': {len(points)} grid points, {workers} workers")

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outputs = list(pool.map(self.run_point, points))
        else:
            outputs = [self.run_point(point) for point in points]

        columns = SUMMARY_COLUMNS + (TIMING_COLUMNS if spec.record_timing else [])
        result = ExperimentResult(rows=[row for output in outputs for row, _ in output])
        out = Path(output_dir or spec.output)
        out.mkdir(parents=True, exist_ok=True)
        result.summary_path = out / f'{spec.name}_summary.csv'
        write_summary(result.summary_path, result.rows, columns)

        if spec.traces:
            trace_dir = out / f'{spec.name}_traces'
            trace_dir.mkdir(exist_ok=True)
            for point, output in zip(points, outputs):
                for row, trace in output:
                    if trace is None:
                        continue
                    path = trace_dir / f"{point.index:04d}_{point.strategy}_k{row['k']}_s{point.seed}.csv"
                    write_trace(path, trace, spec.record_timing)
                    result.trace_paths.append(path)

        logger.info(f"Experiment '{spec.name}' finished: {len(result.rows)} rows, {result.failures} failures")
        return result


def run_experiment(spec: ExperimentSpec, output_dir: Optional[str] = None,
                   workers: Optional[int] = None) -> ExperimentResult:
    return ExperimentService(spec).run_experiment(output_dir, workers)
