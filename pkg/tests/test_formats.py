import math

import numpy as np
import pytest

from conftest import rel
from lrgeomcg.exceptions import FormatError, SpecError
from lrgeomcg.services.cg_solver import IterationRecord, SolverConfig, SolverTrace, solve
from lrgeomcg.services.manifold import random_point
from lrgeomcg.services.problems import gen_bivariate, random_start
from lrgeomcg.services.sampling import SamplingSet
from lrgeomcg.utils.formats import (
    TRACE_COLUMNS,
    format_value,
    load_factors,
    load_ground_truth,
    read_samples,
    read_trace,
    residuals_from_trace,
    save_factors,
    save_ground_truth,
    write_samples,
    write_summary,
    write_trace,
)
from lrgeomcg.utils.validators import parse_spec_text, validate_spec


def test_format_value():
    assert format_value(None) == ''
    assert format_value(0.1) == '0.1'
    assert format_value(float('nan')) == 'nan'
    assert format_value(np.float64(1e-300)) == '1e-300'
    assert format_value(True) == 'true'
    assert format_value(7) == '7'


def test_sample_file_layout(tmp_path):
    omega = SamplingSet.from_triplets(3, 4, [2, 0], [3, 1], [0.1, -2.5])
    path = tmp_path / 'train.txt'
    write_samples(path, omega)
    assert path.read_text().splitlines() == ['3 4 2', '1 2 -2.5', '3 4 0.10000000000000001']
    again = read_samples(path)
    assert again.shape == (3, 4)
    assert again.same_indices(omega)
    assert np.array_equal(again.values, omega.values)


def test_sample_file_comments(tmp_path):
    path = tmp_path / 'samples.txt'
    path.write_text('% matrix\n# written by hand\n2 2 1\n\n2 1 3.5\n')
    omega = read_samples(path)
    assert omega.rows.tolist() == [1] and omega.cols.tolist() == [0]
    assert omega.values.tolist() == [3.5]


@pytest.mark.parametrize('content', [
    '',
    '2 2\n1 1 1.0\n',
    '2 2 2\n1 1 1.0\n',
    '2 2 1\n1 x 1.0\n',
    '2 2 1\n3 1 1.0\n',
    '2 2 2\n1 1 1.0\n1 1 2.0\n',
])
def test_malformed_sample_files(tmp_path, content):
    path = tmp_path / 'bad.txt'
    path.write_text(content)
    with pytest.raises(FormatError):
        read_samples(path)


def test_trace_file(tmp_path, small_problem):
    _, trace = solve(small_problem, SolverConfig(max_iters=15), random_start(small_problem, 0))
    path = tmp_path / 'trace.csv'
    write_trace(path, trace)
    assert path.read_text().splitlines()[0] == ','.join(TRACE_COLUMNS)
    rows = read_trace(path)
    assert len(rows) == 15
    assert all(row['wall_ns'] == 0 for row in rows)
    assert [row['cost'] for row in rows] == [r.cost for r in trace.records]
    assert math.isnan(rows[-1]['beta'])
    assert residuals_from_trace(rows) == trace.residuals()


def test_trace_file_keeps_cg_records_only(tmp_path):
    trace = SolverTrace()
    trace.records.append(IterationRecord(1, 2.0, math.nan, 0.5, math.nan, math.nan, phase='als'))
    trace.records.append(IterationRecord(1, 1.0, 0.1, 0.25, 3.0, 1.0, wall_ns=99))
    path = tmp_path / 'trace.csv'
    write_trace(path, trace, record_timing=True)
    rows = read_trace(path)
    assert len(rows) == 1
    assert rows[0]['wall_ns'] == 99


def test_trace_with_wrong_columns(tmp_path):
    path = tmp_path / 'trace.csv'
    path.write_text('iteration,cost\n1,2.0\n')
    with pytest.raises(FormatError):
        read_trace(path)


def test_summary_file(tmp_path):
    path = tmp_path / 'summary.csv'
    write_summary(path, [{'a': 1, 'b': None}, {'a': 0.5, 'b': 'x', 'c': 'ignored'}], ['a', 'b'])
    assert path.read_text().splitlines() == ['a,b', '1,', '0.5,x']


def test_factor_archive(tmp_path, rng):
    X = random_point(9, 7, 2, rng)
    path = tmp_path / 'factors.npz'
    save_factors(path, X)
    Y = load_factors(path)
    assert np.array_equal(Y.U, X.U) and np.array_equal(Y.sigma, X.sigma) and np.array_equal(Y.V, X.V)
    np.savez(tmp_path / 'other.npz', W=np.ones(3))
    with pytest.raises(FormatError):
        load_factors(tmp_path / 'other.npz')


def test_ground_truth_archive(tmp_path, small_problem):
    save_ground_truth(tmp_path / 'truth.npz', small_problem.ground_truth)
    truth = load_ground_truth(tmp_path / 'truth.npz')
    assert truth.is_factored
    assert rel(truth.to_dense(), small_problem.ground_truth.to_dense()) == 0.0

    save_ground_truth(tmp_path / 'dense.npz', gen_bivariate(10, 0.5, dense=False))
    dense = load_ground_truth(tmp_path / 'dense.npz')
    assert dense.dense is not None and dense.shape == (10, 10)


# Experiment spec files

SPEC_TEXT = """
# size sweep
kind = size-sweep
sizes = 100, 200
ranks = 5
os = 3
seeds = 1, 2, 3   # three repeats
traces = yes
solver.max_iters = 500
solver.stagnation = true
"""


def test_parse_spec_text():
    spec = validate_spec(parse_spec_text(SPEC_TEXT))
    assert spec == {
        'kind': 'size-sweep',
        'sizes': [100, 200],
        'ranks': [5],
        'os': [3.0],
        'seeds': [1, 2, 3],
        'traces': True,
        'solver': {'max_iters': '500', 'stagnation': 'true'},
    }


@pytest.mark.parametrize('text', [
    'kind = single\nkind = single\nseeds = 1',
    'kind = single\ncolour = blue\nseeds = 1',
    'kind = single\nseeds = one',
    'kind single',
    'kind = single\ntraces = perhaps\nseeds = 1',
])
def test_parse_spec_errors(text):
    with pytest.raises(SpecError):
        parse_spec_text(text)


@pytest.mark.parametrize('text', [
    'kind = single',
    'kind = single\nseeds =',
    'kind = single\nseeds = 1, 1',
    'kind = everything\nseeds = 1',
    'kind = single\nseeds = 1\nos = 0.5',
    'kind = single\nseeds = 1\nname = bad name',
])
def test_validate_spec_errors(text):
    with pytest.raises(SpecError):
        validate_spec(parse_spec_text(text))
