#!/usr/bin/env python3

"""
Tests for configuration validation, experiment runs, sweeps, result files and the CLI.
"""

import json

import pytest

from frilab.config import get_output_dir, get_thread_count
from frilab.errors import ConfigValidationError, InvariantViolation
from frilab.harness import read_results, run_experiment, run_sweep, verify_algorithm_run
from frilab.harness.results import RUN_LOG_FILE, ResultRow, RunLog, atomic_open, read_csv, read_json, write_csv
from frilab.harness.runner import output_dir_for
from frilab.harness.sweep import CELLS_FILE, DONE_MARKER, SWEEP_FILE, cell_dir
from frilab.validation import require_experiment, require_sweep, validate_experiment, validate_sweep
from frilab.workers import WorkerPool
from frilab_cli import main


def omega_config(**overrides):
    data = {
        'id': 'omega-test',
        'kind': 'omega',
        'd': 4,
        'seed': 5,
        'replicas': 2,
        'params': {'q': 0.001, 'gamma': 0.5, 'radius': 2, 'n_sites': 1000},
    }
    data.update(overrides)
    return data


def algorithm_config():
    return {
        'id': 'alg-test',
        'kind': 'algorithm',
        'd': 5,
        'rho': 'dirac:16',
        'params': {'window_radius': 1},
        'typicality': {'events': ['E1'], 'theta2': 0.0},
    }


def test_valid_experiment():
    result = validate_experiment(omega_config())
    assert result.is_valid
    assert result.errors == []
    assert result.config.kind == 'omega'
    assert result.config.kind_params().n_sites == 1000


@pytest.mark.parametrize("data, fragment", [
    (omega_config(replicas=0), 'replicas'),
    (omega_config(d=3), 'd'),
    (omega_config(params={'q': 0.5, 'gamma': 1.0, 'bogus': 1}), 'params'),
    (omega_config(params={'q': 1.5, 'gamma': 1.0}), 'params.q'),
    (omega_config(typicality={'c': 0.02}), 'c'),
    ({'id': 'fri', 'kind': 'fri-sample', 'd': 5, 'params': {'u': 1.0}}, 'length law'),
    ({'id': 'g', 'kind': 'capacity', 'd': 5, 'params': {'quantity': 'green', 'x': [0, 0, 0, 0, 0]}}, 'y'),
    ({'id': 'bad id', 'kind': 'omega', 'd': 4}, 'id'),
])
def test_invalid_experiments(data, fragment):
    """Test that schema and model violations are reported with their location."""
    result = validate_experiment(data)
    assert not result.is_valid
    assert result.config is None
    assert any(fragment in error for error in result.errors)


def test_require_experiment_raises():
    with pytest.raises(ConfigValidationError) as info:
        require_experiment(omega_config(replicas=0))
    assert info.value.exit_code == 2
    assert info.value.errors
    assert info.value.to_record()['error'] == 'validation'


def test_sweep_validation():
    sweep = {'id': 'sw', 'template': omega_config(), 'grid': {'params.q': [0.0, 1.0]}}
    result = validate_sweep(sweep)
    assert result.is_valid
    assert result.config.n_cells == 2

    bad_cell = validate_sweep({**sweep, 'grid': {'params.q': [0.5, 2.0]}})
    assert not bad_cell.is_valid
    assert all(error.startswith('cell 1') for error in bad_cell.errors)

    assert not validate_sweep({**sweep, 'grid': {'seed': [1, 2]}}).is_valid
    assert not validate_sweep({**sweep, 'grid': {}}).is_valid


def test_sweep_cells_derive_ids_and_seeds():
    sweep = require_sweep({'id': 'sw', 'template': omega_config(), 'grid': {'params.q': [0.0, 1.0],
                                                                            'params.radius': [1, 2]}})
    cells = list(sweep.cells())
    assert [index for index, _, _ in cells] == [0, 1, 2, 3]
    assert cells[1][1] == {'params.q': 0.0, 'params.radius': 2}
    assert cells[3][2]['id'] == 'omega-test-cell0003'
    assert len({data['seed'] for _, _, data in cells}) == 4
    assert cells[0][2]['params']['gamma'] == 0.5


def test_omega_experiment_rows(tmp_path):
    config = require_experiment(omega_config())
    output = run_experiment(config, tmp_path / 'omega')
    quantities = [row.quantity for row in output.rows]
    assert quantities[:2] == ['open_frequency', 'open_probability']
    assert quantities.count('density') == 2
    assert output.rows[1].estimate == pytest.approx(0.999 ** 81)
    assert output.rows[0].params['q'] == 0.001

    stored = read_results(tmp_path / 'omega' / 'results.csv')
    assert [(r.quantity, r.replica, r.estimate) for r in stored] == \
           [(r.quantity, r.replica, r.estimate) for r in output.rows]
    assert read_json(tmp_path / 'omega' / 'config.json')['id'] == 'omega-test'
    assert RunLog(tmp_path / 'omega').entries()[-1]['status'] == 'ok'


def test_reruns_are_byte_identical(tmp_path):
    """Test that the same seed reproduces results.csv exactly, with any worker count."""
    config = require_experiment(omega_config())
    run_experiment(config, tmp_path / 'a', WorkerPool(1))
    run_experiment(config, tmp_path / 'b', WorkerPool(2))
    first = (tmp_path / 'a' / 'results.csv').read_bytes()
    assert first == (tmp_path / 'b' / 'results.csv').read_bytes()
    other = require_experiment(omega_config(seed=6))
    run_experiment(other, tmp_path / 'c')
    assert first != (tmp_path / 'c' / 'results.csv').read_bytes()


def test_collect_without_writing(tmp_path):
    config = require_experiment(omega_config())
    output = run_experiment(config, tmp_path / 'none', write=False)
    assert output.rows
    assert not (tmp_path / 'none').exists()


def test_capacity_experiment_mean_row(tmp_path):
    config = require_experiment({
        'id': 'cap', 'kind': 'capacity', 'd': 5, 'replicas': 2,
        'params': {'quantity': 'capacity', 'set': {'shape': 'origin'}},
        'potential': {'mc_walks': 200, 'escape_cutoff_steps': 200},
    })
    output = run_experiment(config, tmp_path)
    assert [row.quantity for row in output.rows] == ['capacity', 'capacity', 'capacity_mean']
    assert output.rows[2].replica is None
    assert output.rows[2].n_samples == 2


def test_module_value_errors_become_validation_errors(tmp_path):
    """Test that a run-time argument error is reported as a validation failure with error.json."""
    config = require_experiment({'id': 'rec', 'kind': 'explore', 'd': 5, 'rho': 'dirac:3',
                                 'params': {'u': 0.1, 'mode': 'recursion'}})
    with pytest.raises(ConfigValidationError):
        run_experiment(config, tmp_path)
    record = read_json(tmp_path / 'error.json')
    assert record['error'] == 'validation'
    assert record['exit_code'] == 2
    assert RunLog(tmp_path).entries()[-1]['status'] == 'validation'


def test_algorithm_run_replays(tmp_path):
    config = require_experiment(algorithm_config())
    output = run_experiment(config, tmp_path)
    rounds = [row for row in output.rows if row.quantity == 'rounds']
    assert rounds[0].estimate == 0.0
    assert rounds[0].params['outcome'] == 'no-seed'
    assert (tmp_path / 'record_0.ndjson').exists()
    assert verify_algorithm_run(tmp_path) == (True, [])


def test_tampered_status_map_fails_replay(tmp_path):
    run_experiment(require_experiment(algorithm_config()), tmp_path)
    rows = read_csv(tmp_path / 'status_0.csv')
    rows[0]['status'] = 'ruined'
    write_csv(tmp_path / 'status_0.csv', rows)
    ok, mismatches = verify_algorithm_run(tmp_path)
    assert not ok
    assert mismatches == [{'x': [0, 0, 0, 0, 0], 'stored': 'ruined', 'replayed': 'unexplored'}]


def test_sweep_matches_single_runs_and_resumes(tmp_path):
    """Test that each sweep cell equals a standalone run and that a rerun resumes every cell."""
    sweep = require_sweep({'id': 'sw', 'template': omega_config(), 'grid': {'params.q': [0.0, 1.0]}})
    result = run_sweep(sweep, tmp_path / 'sweep')
    assert not result.failed
    assert (cell_dir(tmp_path / 'sweep', 1) / DONE_MARKER).exists()

    _, _, data = next(sweep.cells())
    single = run_experiment(require_experiment(data), tmp_path / 'single')
    assert [(r.quantity, r.estimate) for r in result.cells[0].rows] == \
           [(r.quantity, r.estimate) for r in single.rows]
    assert result.cells[0].rows[0].estimate == 1.0
    assert result.cells[1].rows[0].estimate == 0.0

    aggregated = (tmp_path / 'sweep' / SWEEP_FILE).read_bytes()
    again = run_sweep(sweep, tmp_path / 'sweep')
    assert all(cell.resumed for cell in again.cells)
    assert (tmp_path / 'sweep' / SWEEP_FILE).read_bytes() == aggregated
    cells = read_csv(tmp_path / 'sweep' / CELLS_FILE)
    assert [row['status'] for row in cells] == ['ok', 'ok']


def test_sweep_records_failed_cells(tmp_path):
    template = {'id': 'ch', 'kind': 'chain', 'd': 4, 'rho': 'dirac:16', 'params': {'axis': 0}}
    sweep = require_sweep({'id': 'sw', 'template': template, 'grid': {'params.axis': [9]}})
    result = run_sweep(sweep, tmp_path)
    assert len(result.failed) == 1
    assert result.failed[0].error['error'] == 'validation'
    assert read_csv(tmp_path / CELLS_FILE)[0]['status'] == 'failed'
    assert RunLog(tmp_path).entries()[-1]['status'] == 'partial'


def test_atomic_open_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / 'out.csv'
    with pytest.raises(RuntimeError):
        with atomic_open(target) as f:
            f.write('partial')
            raise RuntimeError('interrupted')
    assert list(tmp_path.iterdir()) == []


def test_result_row_csv_round_trip():
    row = ResultRow('e', 'q', 1.5, 0.25, 0.0, 10, 3, None, {'u': 0.5, 'k': 2})
    assert ResultRow.from_csv_row({k: str(v) for k, v in row.to_csv_row().items()}) == row


def test_environment_settings(monkeypatch, tmp_path):
    monkeypatch.setenv('FRILAB_THREADS', '3')
    assert get_thread_count() == 3
    monkeypatch.setenv('FRILAB_THREADS', '0')
    with pytest.raises(ValueError):
        get_thread_count()
    monkeypatch.setenv('FRILAB_THREADS', 'many')
    with pytest.raises(ValueError):
        get_thread_count()
    monkeypatch.setenv('FRILAB_OUTPUT_DIR', str(tmp_path))
    assert get_output_dir() == tmp_path
    assert output_dir_for(require_experiment(omega_config())) == tmp_path / 'omega-test'


def test_worker_pool_keeps_order():
    assert WorkerPool(2).map(abs, [-3, 1, -2]) == [3, 1, 2]
    assert WorkerPool(1).map(abs, []) == []
    with pytest.raises(ValueError):
        WorkerPool(0)


def test_cli_schema(capsys):
    assert main(['schema']) == 0
    schema = json.loads(capsys.readouterr().out)
    assert set(schema) == {'experiment', 'params', 'sections', 'sweep'}
    assert 'omega' in schema['params']


def test_cli_validate(tmp_path):
    good = tmp_path / 'good.json'
    good.write_text(json.dumps(omega_config()))
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps(omega_config(replicas=0)))
    assert main(['validate', '--config', str(good)]) == 0
    assert main(['validate', '--config', str(bad)]) == 2
    assert main(['validate', '--config', str(tmp_path / 'missing.json')]) == 2
    assert main(['validate', '--config', str(tmp_path / 'good.txt')]) == 2


def test_cli_run_with_flags(tmp_path):
    out = tmp_path / 'om'
    code = main(['omega', '--d', '4', '--q', '0.001', '--gamma', '0.5', '--radius', '2', '--n-sites', '500',
                 '--seed', '3', '--out', str(out)])
    assert code == 0
    rows = read_results(out / 'results.csv')
    assert rows[0].experiment_id == 'omega'
    assert rows[0].seed == 3
    assert (out / RUN_LOG_FILE).exists()


def test_cli_params_and_verify(tmp_path):
    out = tmp_path / 'alg'
    code = main(['algorithm', '--d', '5', '--rho', 'dirac:16', '--window-radius', '1',
                 '--param', 'typicality.events=["E1"]', '--param', 'typicality.theta2=0', '--out', str(out)])
    assert code == 0
    assert main(['verify', '--run-dir', str(out)]) == 0
    rows = read_csv(out / 'status_0.csv')
    rows[0]['status'] = 'ruined'
    write_csv(out / 'status_0.csv', rows)
    assert main(['verify', '--run-dir', str(out)]) == InvariantViolation.exit_code


def test_cli_errors(tmp_path):
    assert main([]) == 2
    assert main(['omega', '--d', '4', '--q', '2.0', '--gamma', '1', '--out', str(tmp_path)]) == 2
    assert main(['omega', '--d', '4', '--param', 'params.q', '--out', str(tmp_path)]) == 2
