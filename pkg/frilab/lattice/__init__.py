"""
Points, boxes, trajectories and random streams on Z^d.
"""

from .points import (
    Box,
    KeyFrame,
    Point,
    PointSet,
    coordinate_limit,
    dilated_volume,
    global_frame,
    l1_norm,
    linf_norm,
    origin,
    pack,
    union_all,
    unit_moves,
    unit_vector,
    unpack,
    validate_dimension,
)
from .rng import RngStream, derive_seed
from .trajectory import (
    Trajectory,
    concatenate,
    random_steps,
    sample_srw,
    translation_equivalent,
    walk_from_generator,
)

__all__ = [
    'Box', 'KeyFrame', 'Point', 'PointSet', 'RngStream', 'Trajectory',
    'concatenate', 'coordinate_limit', 'derive_seed', 'dilated_volume', 'global_frame', 'l1_norm', 'linf_norm',
    'origin', 'pack', 'random_steps', 'sample_srw', 'translation_equivalent',
    'union_all', 'unit_moves', 'unit_vector', 'unpack', 'validate_dimension',
    'walk_from_generator',
]
