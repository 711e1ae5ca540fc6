"""Data models package."""

from .experiment import KINDS, ExperimentConfig, SetSpec, SweepConfig, parse_law
from .params import AlgorithmParams, PotentialConfig, TypicalityParams

__all__ = [
    'KINDS', 'ExperimentConfig', 'SetSpec', 'SweepConfig', 'parse_law',
    'AlgorithmParams', 'PotentialConfig', 'TypicalityParams',
]
