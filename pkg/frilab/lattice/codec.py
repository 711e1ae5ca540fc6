"""
NDJSON trajectory records.

One record per line: {"d": 4, "start": [...], "steps": "<base64 step codes>"}
plus an optional "provenance" object. Encoding is bit-exact.
"""

import base64
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Optional, Tuple, Union

from .trajectory import Trajectory


def encode_trajectory(traj: Trajectory, provenance: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    record = {
        'd': traj.d,
        'start': list(traj.start),
        'steps': base64.b64encode(traj.steps.tobytes()).decode('ascii'),
    }
    if provenance:
        record['provenance'] = provenance
    return record


def decode_trajectory(record: Dict[str, Any]) -> Trajectory:
    start = record['start']
    if len(start) != record['d']:
        raise ValueError(f"start has {len(start)} coordinates but d={record['d']}")
    return Trajectory(start, base64.b64decode(record['steps']))


def dumps(traj: Trajectory, provenance: Optional[Dict[str, Any]] = None) -> str:
    return json.dumps(encode_trajectory(traj, provenance), separators=(',', ':'))


def loads(line: str) -> Tuple[Trajectory, Optional[Dict[str, Any]]]:
    record = json.loads(line)
    return decode_trajectory(record), record.get('provenance')


def write_ndjson(path: Union[str, Path], items: Iterable[Tuple[Trajectory, Optional[Dict[str, Any]]]]) -> int:
    """Write (trajectory, provenance) pairs, one per line. Returns the count."""
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for traj, provenance in items:
            f.write(dumps(traj, provenance))
            f.write('\n')
            count += 1
    return count


def read_ndjson(path: Union[str, Path]) -> Iterator[Tuple[Trajectory, Optional[Dict[str, Any]]]]:
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line:
                yield loads(line)
