"""Experiment orchestration: runs, sweeps and result files."""

from .results import ResultRow, RunLog, read_results, write_csv, write_ndjson, write_results
from .runner import ExperimentOutput, run_experiment, verify_algorithm_run
from .sweep import CellOutcome, SweepResult, run_sweep

__all__ = [
    'ResultRow', 'RunLog', 'read_results', 'write_csv', 'write_ndjson', 'write_results',
    'ExperimentOutput', 'run_experiment', 'verify_algorithm_run',
    'CellOutcome', 'SweepResult', 'run_sweep',
]
