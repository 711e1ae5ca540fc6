"""
Parameter sweeps.

A sweep runs the cross product of its grid, one experiment per cell, each
with a seed derived from the template seed and the cell index. Finished
cells leave a completion marker; rerunning the sweep skips them and reads
their rows back, so an interrupted sweep resumes with identical output.
Failed cells are recorded and the sweep carries on.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..config import get_output_dir
from ..errors import FrilabError
from ..models.experiment import SweepConfig
from ..validation import require_experiment
from ..workers import WorkerPool, get_worker_pool
from .results import CSV_FIELDS, RESULTS_FILE, ResultRow, RunLog, read_results, write_csv, write_json
from .runner import run_experiment

logger = logging.getLogger(__name__)

DONE_MARKER = "cell.done"
SWEEP_FILE = "sweep.csv"
CELLS_FILE = "cells.csv"


@dataclass
class CellOutcome:
    index: int
    values: Dict[str, Any]
    status: str
    rows: List[ResultRow] = field(default_factory=list)
    resumed: bool = False
    error: Optional[Dict[str, Any]] = None


@dataclass
class SweepResult:
    sweep: SweepConfig
    cells: List[CellOutcome]
    out_dir: Path

    @property
    def failed(self) -> List[CellOutcome]:
        return [c for c in self.cells if c.status != 'ok']

    def rows(self) -> List[ResultRow]:
        return [row for cell in self.cells for row in cell.rows]


def _cell_value(value: Any) -> Any:
    """Grid values as CSV cells: scalars as they are, structures as JSON."""
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, separators=(',', ':'))
    return value


def cell_dir(out_dir: Path, index: int) -> Path:
    return out_dir / 'cells' / f"cell-{index:04d}"


def _run_cell(index: int, values: Dict[str, Any], data: Dict[str, Any], out_dir: Path, pool: WorkerPool,
              resume: bool) -> CellOutcome:
    target = cell_dir(out_dir, index)
    marker = target / DONE_MARKER
    if resume and marker.exists():
        logger.debug(f"Sweep cell {index} already complete, reading {target / RESULTS_FILE}")
        return CellOutcome(index, values, 'ok', read_results(target / RESULTS_FILE), resumed=True)
    try:
        config = require_experiment(data)
        output = run_experiment(config, target, pool)
    except FrilabError as e:
        logger.warning(f"Sweep cell {index} {values} failed ({e.kind}): {e.message}")
        return CellOutcome(index, values, 'failed', error=e.to_record())
    write_json(marker, {'cell': index, 'values': values, 'rows': len(output.rows)})
    return CellOutcome(index, values, 'ok', output.rows)


def run_sweep(sweep: SweepConfig, out_dir: Optional[Union[str, Path]] = None,
              pool: Optional[WorkerPool] = None, resume: bool = True) -> SweepResult:
    """
    Run every cell of the grid and write the aggregated long-format CSV.

    Args:
        sweep: Validated sweep configuration
        out_dir: Output directory (default: the sweep's `output`, then FRILAB_OUTPUT_DIR/<id>)
        pool: Worker pool handed to each cell
        resume: Skip cells that carry a completion marker

    Returns:
        SweepResult with one outcome per cell
    """
    pool = pool or get_worker_pool()
    if out_dir is not None:
        target = Path(out_dir)
    elif sweep.output:
        target = Path(sweep.output)
    else:
        target = get_output_dir() / sweep.id
    axes = list(sweep.grid)
    logger.info(f"Running sweep {sweep.id}: {sweep.n_cells} cells over {axes}")
    started = time.perf_counter()

    cells = [_run_cell(index, values, data, target, pool, resume) for index, values, data in sweep.cells()]

    aggregated = []
    for cell in cells:
        for row in cell.rows:
            aggregated.append({'cell': cell.index, **{a: _cell_value(cell.values[a]) for a in axes},
                               **row.to_csv_row()})
    write_csv(target / SWEEP_FILE, aggregated, ['cell', *axes, *CSV_FIELDS])
    write_csv(target / CELLS_FILE,
              [{'cell': c.index, **{a: _cell_value(c.values[a]) for a in axes}, 'status': c.status,
                'rows': len(c.rows), 'error': c.error['message'] if c.error else ''} for c in cells],
              ['cell', *axes, 'status', 'rows', 'error'])

    result = SweepResult(sweep, cells, target)
    resumed = sum(1 for c in cells if c.resumed)
    RunLog(target).append(sweep.id, 'sweep', 'ok' if not result.failed else 'partial',
                          time.perf_counter() - started, cells=len(cells), failed=len(result.failed),
                          resumed=resumed)
    if result.failed:
        logger.warning(f"Sweep {sweep.id}: {len(result.failed)} of {len(cells)} cells failed")
    logger.info(f"Sweep {sweep.id} finished: {len(aggregated)} rows, {resumed} cells resumed")
    return result
