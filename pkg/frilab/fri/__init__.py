"""Finitary random interlacement clouds and samplers."""

from .cloud import CloudEntry, OccupiedGraph, TrajectoryCloud, occupied_graph
from .sampler import (
    MonotoneCloud,
    default_margin,
    expected_hit_count,
    sample_conditioned_hit,
    sample_hitting,
    sample_window,
    thin,
)

__all__ = [
    'CloudEntry', 'OccupiedGraph', 'TrajectoryCloud', 'occupied_graph',
    'MonotoneCloud', 'default_margin', 'expected_hit_count', 'sample_conditioned_hit',
    'sample_hitting', 'sample_window', 'thin',
]
