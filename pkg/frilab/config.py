"""
Configuration management for frilab.

Runtime settings come from environment variables first and fall back to
defaults; experiment descriptions are JSON files on disk.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Union

DEFAULT_OUTPUT_DIR = "results"


def get_thread_count() -> int:
    """
    Number of worker processes used for replicas and sweep cells.

    Returns:
        Value of FRILAB_THREADS, or 1 when unset
    """
    raw = os.environ.get('FRILAB_THREADS', '1')
    try:
        threads = int(raw)
    except ValueError:
        raise ValueError(f"FRILAB_THREADS must be an integer, got {raw!r}")
    if threads < 1:
        raise ValueError(f"FRILAB_THREADS must be >= 1, got {threads}")
    return threads


def get_output_dir() -> Path:
    """Default directory for result files."""
    return Path(os.environ.get('FRILAB_OUTPUT_DIR', DEFAULT_OUTPUT_DIR))


def debug_asserts_enabled() -> bool:
    """Per-sample step checks, enabled with FRILAB_DEBUG_ASSERTS=1."""
    return os.environ.get('FRILAB_DEBUG_ASSERTS', '0').lower() in ('1', 'true', 'yes')


def load_experiment_config(config_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load an experiment configuration from a JSON file.

    Args:
        config_path: Path to the JSON file

    Returns:
        The parsed configuration dictionary (not yet validated)
    """
    path = Path(config_path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)
