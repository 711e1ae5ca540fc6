"""
Result files.

Every experiment writes `results.csv` (long format, one ResultRow per line)
plus kind-specific CSV/NDJSON artifacts. Files are written to a temporary
name and moved into place, so a reader never sees a half-written file.
Wall times only go to `run_log.ndjson`; CSV output is byte-identical on
reruns with the same seed.
"""

import csv
import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Generator, Iterable, List, Optional, Sequence, TextIO, Union

from ..errors import FrilabError
from ..potential.estimators import Estimate

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
RUN_LOG_FILE = "run_log.ndjson"
ERROR_FILE = "error.json"

CSV_FIELDS = ['experiment_id', 'replica', 'quantity', 'params', 'estimate', 'stderr', 'bias_bound',
              'n_samples', 'seed']


@dataclass
class ResultRow:
    """One estimate with its error budget and the parameters that produced it."""
    experiment_id: str
    quantity: str
    estimate: float
    stderr: float = 0.0
    bias_bound: float = 0.0
    n_samples: int = 0
    seed: int = 0
    replica: Optional[int] = None
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_estimate(cls, experiment_id: str, quantity: str, estimate: Estimate, seed: int,
                      replica: Optional[int] = None, params: Optional[Dict[str, Any]] = None) -> "ResultRow":
        return cls(experiment_id, quantity, float(estimate.value), float(estimate.stderr),
                   float(estimate.bias_bound), int(estimate.n_samples), seed, replica, dict(params or {}))

    def to_csv_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row['params'] = json.dumps(self.params, sort_keys=True, separators=(',', ':'), default=_jsonable)
        row['replica'] = '' if self.replica is None else self.replica
        return row

    @classmethod
    def from_csv_row(cls, row: Dict[str, str]) -> "ResultRow":
        return cls(
            experiment_id=row['experiment_id'],
            quantity=row['quantity'],
            estimate=float(row['estimate']),
            stderr=float(row['stderr']),
            bias_bound=float(row['bias_bound']),
            n_samples=int(row['n_samples']),
            seed=int(row['seed']),
            replica=int(row['replica']) if row['replica'] != '' else None,
            params=json.loads(row['params']),
        )


def _jsonable(value: Any) -> Any:
    """Fallback encoder for numpy scalars, tuples and paths."""
    if hasattr(value, 'item'):
        return value.item()
    if hasattr(value, 'tolist'):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(record: Any) -> str:
    """Compact, key-sorted JSON; non-finite floats become null."""
    return json.dumps(_finite(record), sort_keys=True, separators=(',', ':'), default=_jsonable)


def _finite(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


@contextmanager
def atomic_open(path: Union[str, Path]) -> Generator[TextIO, None, None]:
    """Open a temporary file next to `path`; it replaces `path` when the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent, text=True)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise


def write_csv(path: Union[str, Path], rows: Sequence[Dict[str, Any]],
              fieldnames: Optional[Sequence[str]] = None) -> int:
    """
    Write rows atomically as CSV.

    Args:
        path: Destination file
        rows: Row dictionaries
        fieldnames: Column order (default: keys of the first row, then new keys in order of appearance)

    Returns:
        Number of rows written
    """
    if fieldnames is None:
        fieldnames = []
        for row in rows:
            fieldnames.extend(k for k in row if k not in fieldnames)
    with atomic_open(path) as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, '') for k in fieldnames})
    return len(rows)


def write_results(path: Union[str, Path], rows: Iterable[ResultRow]) -> int:
    return write_csv(path, [row.to_csv_row() for row in rows], CSV_FIELDS)


def write_ndjson(path: Union[str, Path], records: Iterable[Any]) -> int:
    """Write one JSON document per line, atomically."""
    count = 0
    with atomic_open(path) as f:
        for record in records:
            f.write(dumps(record) + '\n')
            count += 1
    return count


def write_json(path: Union[str, Path], record: Any) -> None:
    with atomic_open(path) as f:
        json.dump(_finite(record), f, indent=2, sort_keys=True, default=_jsonable)
        f.write('\n')


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def read_results(path: Union[str, Path]) -> List[ResultRow]:
    return [ResultRow.from_csv_row(row) for row in read_csv(path)]


def read_ndjson(path: Union[str, Path]) -> List[Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def read_json(path: Union[str, Path]) -> Any:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_error(out_dir: Union[str, Path], error: FrilabError) -> Path:
    """Write the machine-readable error record next to the results."""
    path = Path(out_dir) / ERROR_FILE
    write_json(path, error.to_record())
    logger.debug(f"Error record written to {path}")
    return path


class RunLog:
    """Append-only `run_log.ndjson`: one entry per finished experiment or sweep cell."""

    def __init__(self, out_dir: Union[str, Path]):
        self.path = Path(out_dir) / RUN_LOG_FILE

    def append(self, experiment_id: str, kind: str, status: str, wall_time: float,
               **details: Any) -> Dict[str, Any]:
        entry = {
            'experiment_id': experiment_id,
            'kind': kind,
            'status': status,
            'wall_time_s': round(wall_time, 6),
            'finished_at': datetime.now(timezone.utc).isoformat(),
            **details,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, 'a', encoding='utf-8') as f:
            f.write(dumps(entry) + '\n')
        return entry

    def entries(self) -> List[Dict[str, Any]]:
        if not self.path.exists():
            return []
        return read_ndjson(self.path)
