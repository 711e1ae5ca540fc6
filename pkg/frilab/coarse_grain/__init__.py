"""Coarse-grained exploration: typicality, proper parts, seeds, the algorithm, omega^q and branching."""

from .algorithm import (
    EXTINCT,
    NO_SEED,
    WINDOW_EXHAUSTED,
    AlgorithmState,
    RoundRecord,
    Status,
    failure_frequency,
    replay_record,
    run_algorithm,
    verify_replay,
)
from .branching import (
    BranchingResult,
    chain_hit_frequency,
    direct_square_chain,
    expected_trimmed_offspring,
    hit_chain_samples,
    simulate_branching,
    simulate_hit_chain,
    typical_start,
)
from .context import CoarseContext
from .omega import OmegaSample, largest_cluster_spans, omega_site_frequency, open_probability, sample_omega_q
from .proper import proper_part, star_proper_part
from .scales import Scales, coarse_neighbors, coarse_order, derive_scales
from .seeds import GoodSequenceVerdict, Seed, check_good_sequence, find_seed
from .typical import TypicalityVerdict, classify_typical, is_typical, restrict_typical

__all__ = [
    'EXTINCT', 'NO_SEED', 'WINDOW_EXHAUSTED', 'AlgorithmState', 'RoundRecord', 'Status',
    'failure_frequency', 'replay_record', 'run_algorithm', 'verify_replay',
    'BranchingResult', 'chain_hit_frequency', 'direct_square_chain', 'expected_trimmed_offspring',
    'hit_chain_samples', 'simulate_branching', 'simulate_hit_chain', 'typical_start',
    'CoarseContext',
    'OmegaSample', 'largest_cluster_spans', 'omega_site_frequency', 'open_probability', 'sample_omega_q',
    'proper_part', 'star_proper_part',
    'Scales', 'coarse_neighbors', 'coarse_order', 'derive_scales',
    'GoodSequenceVerdict', 'Seed', 'check_good_sequence', 'find_seed',
    'TypicalityVerdict', 'classify_typical', 'is_typical', 'restrict_typical',
]
