"""
Typical trajectories.

A trajectory is typical when four events hold: its length lies in the band
[k R^2, K R^2] and it stays in B(eta(0), M R) (E1); its capacity is close to
the capacity scale (E2); its L-sausage is not too large (E3); and every
block of T' steps has small capacity, plus small diameter in d = 4 (E4).

Capacity verdicts come from Monte Carlo estimates and are three-valued. An
uncertain verdict counts as a failure.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from ..fri.cloud import TrajectoryCloud
from ..lattice.points import dilated_volume
from ..lattice.trajectory import Trajectory
from ..potential.estimators import Estimate, truncated_capacity
from .context import CoarseContext, trajectory_label

logger = logging.getLogger(__name__)

PASS = 'pass'
FAIL = 'fail'
UNCERTAIN = 'uncertain'


@dataclass
class TypicalityVerdict:
    typical: bool
    failed: Tuple[str, ...] = ()
    outcomes: Dict[str, str] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record['failed'] = list(self.failed)
        return record


def compare(estimate: Estimate, bound: float, above: bool, z: float) -> str:
    """
    Three-valued comparison of an estimate with a bound.

    Args:
        estimate: Monte Carlo estimate
        bound: Threshold
        above: Check estimate > bound (True) or estimate < bound (False)
        z: Width of the interval in standard errors
    """
    lo, hi = estimate.interval(z, with_bias=False)
    if above:
        if lo > bound:
            return PASS
        return FAIL if hi <= bound else UNCERTAIN
    if hi < bound:
        return PASS
    return FAIL if lo >= bound else UNCERTAIN


def combine(outcomes: List[str]) -> str:
    if FAIL in outcomes:
        return FAIL
    if UNCERTAIN in outcomes:
        return UNCERTAIN
    return PASS


def check_duration(traj: Trajectory, ctx: CoarseContext) -> Tuple[str, Dict[str, Any]]:
    """E1: T in [k R^2, K R^2] and range in B(eta(0), M R)."""
    scales = ctx.scales
    lo, hi = scales.band
    displacement = traj.max_displacement()
    ok = lo <= traj.length <= hi and displacement <= scales.M * scales.R
    return (PASS if ok else FAIL), {'T': traj.length, 'max_displacement': displacement}


def check_sausage(traj: Trajectory, ctx: CoarseContext) -> Tuple[str, Dict[str, Any]]:
    """E3: |B(eta, L)| < R^2 L^(d-2) I^(1/3)."""
    scales = ctx.scales
    volume = dilated_volume(traj.points(), int(math.floor(scales.L)), ctx.d)
    bound = scales.R ** 2 * scales.L ** (ctx.d - 2) * scales.I ** (1 / 3)
    return (PASS if volume < bound else FAIL), {'sausage_volume': volume, 'sausage_bound': bound}


def check_capacity(traj: Trajectory, ctx: CoarseContext) -> Tuple[str, Dict[str, Any]]:
    """E2: capacity of the range within (1 -+ theta_1^2) of the capacity scale."""
    scales, params = ctx.scales, ctx.params
    z = params.z_score
    theta = params.theta1 ** 2
    target = scales.capacity_scale(traj.length)
    cap = ctx.range_measure(traj).total()
    details = {'capacity': cap.to_dict(), 'capacity_scale': target}
    if ctx.d == 4:
        label = trajectory_label(traj)
        truncated = ctx.memo('truncated_range', label, lambda: truncated_capacity(
            traj.range_set(), scales.R ** 2, ctx.cfg, ctx.stream_for('truncated_range', label)))
        details['truncated_capacity'] = truncated.to_dict()
        outcome = combine([compare(cap, (1 - theta) * target, True, z),
                           compare(truncated, (1 + theta) * target, False, z)])
    else:
        outcome = combine([compare(cap, (1 - theta) * target, True, z),
                           compare(cap, (1 + theta) * target, False, z)])
    return outcome, details


def blocks(traj: Trajectory, block: int) -> List[Trajectory]:
    """eta[j T', (j+1) T' ^ T] for all j with j T' <= T."""
    T = traj.length
    return [traj.sub_path(start, min(start + block, T)) for start in range(0, T + 1, block)]


def check_blocks(traj: Trajectory, ctx: CoarseContext) -> Tuple[str, Dict[str, Any]]:
    """E4: every T'-block has small capacity (and, in d = 4, small diameter)."""
    scales, params = ctx.scales, ctx.params
    bound = (1 + params.theta1 ** 2) * scales.capacity_scale(scales.T_block)
    diameter_bound = 0.5 * math.sqrt(traj.length) * scales.log_mu1 ** (-params.c) if ctx.d == 4 else math.inf
    outcomes = []
    worst = 0.0
    for piece in blocks(traj, scales.T_block):
        if piece.diameter() >= diameter_bound:
            return FAIL, {'block_start': piece.start, 'block_diameter': piece.diameter(),
                          'diameter_bound': diameter_bound}
        cap = ctx.set_measure(piece.range_set()).total()
        worst = max(worst, cap.value)
        outcome = compare(cap, bound, False, params.z_score)
        if outcome == FAIL:
            return FAIL, {'block_start': piece.start, 'block_capacity': cap.to_dict(), 'block_bound': bound}
        outcomes.append(outcome)
    return combine(outcomes), {'max_block_capacity': worst, 'block_bound': bound}


CHECKS = (
    ('E1', check_duration),
    ('E3', check_sausage),
    ('E2', check_capacity),
    ('E4', check_blocks),
)


def classify_typical(traj: Trajectory, ctx: CoarseContext, stop_early: bool = False) -> TypicalityVerdict:
    """
    Evaluate the enabled typicality events.

    Args:
        traj: Trajectory
        ctx: Coarse context (parameters, scales, potential caches)
        stop_early: Skip the remaining events after the first failure

    Returns:
        TypicalityVerdict with per-event outcomes; uncertain capacity
        verdicts are listed among the failed events
    """
    key = (trajectory_label(traj), stop_early)

    def compute() -> TypicalityVerdict:
        outcomes: Dict[str, str] = {}
        details: Dict[str, Any] = {}
        failed: List[str] = []
        for name, check in CHECKS:
            if name not in ctx.params.events:
                continue
            outcome, info = check(traj, ctx)
            outcomes[name] = outcome
            details[name] = info
            if outcome != PASS:
                failed.append(name)
                if stop_early:
                    break
        failed.sort()
        return TypicalityVerdict(not failed, tuple(failed), outcomes, details)

    return ctx.memo('typical', key, compute)


def is_typical(traj: Trajectory, ctx: CoarseContext) -> bool:
    return classify_typical(traj, ctx, stop_early=True).typical


def typical_mask(cloud: TrajectoryCloud, ctx: CoarseContext) -> np.ndarray:
    return np.array([is_typical(traj, ctx) for traj in cloud], dtype=bool)


def restrict_typical(cloud: TrajectoryCloud, ctx: CoarseContext) -> TrajectoryCloud:
    """The sub-cloud of typical trajectories."""
    if len(cloud) == 0:
        return cloud
    mask = typical_mask(cloud, ctx)
    logger.debug(f"Typical restriction: kept {int(mask.sum())} of {len(cloud)}")
    return cloud.filter(mask)
