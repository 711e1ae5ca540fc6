"""
Length laws rho, their moments, and the reference intensities u_n.
"""

from .length_law import (
    EPSILON_4,
    Dirac,
    Geometric,
    LengthDistribution,
    PmfTable,
    Scaled,
    SizeBiased,
    appropriateness_theta,
    default_epsilon,
    from_spec,
    moment,
    parse_shorthand,
    perturbed,
    reference_intensity,
    tail_moment,
)

__all__ = [
    'EPSILON_4', 'Dirac', 'Geometric', 'LengthDistribution', 'PmfTable', 'Scaled',
    'SizeBiased', 'appropriateness_theta', 'default_epsilon', 'from_spec', 'moment',
    'parse_shorthand', 'perturbed', 'reference_intensity', 'tail_moment',
]
