"""
*-proper and proper parts of a trajectory.

The *-proper part keeps the points of the range where the equilibrium
measure of the range is not too small (and, in d = 4, where returns before
the cutoff are rare). The proper part with respect to (A, D) further removes
the points visited within R^2 / I steps of the hitting time of A and the
points within distance L of D.
"""

import logging
import math
from typing import List, Optional

import numpy as np
from scipy.spatial import KDTree

from ..fri.cloud import TrajectoryCloud
from ..lattice.points import PointSet
from ..lattice.trajectory import Trajectory
from ..potential.estimators import Estimate, phi_from_measures
from ..potential.walks import escape_probabilities
from .context import CoarseContext, trajectory_label

logger = logging.getLogger(__name__)


def star_proper_part(traj: Trajectory, ctx: CoarseContext) -> PointSet:
    """
    eta-hat.

    d >= 5: {x : e_eta(x) >= theta_2}. d = 4: e_eta(x) >= theta_2 / log mu_1
    and P^x[H~_eta > t] <= (1 + theta_1) e_eta(x), t the return cutoff.
    """
    label = trajectory_label(traj)

    def compute() -> PointSet:
        params, scales = ctx.params, ctx.scales
        if ctx.d >= 5 and params.theta2 == 0:
            return traj.range_set()
        measure = ctx.range_measure(traj)
        if ctx.d >= 5:
            keep = measure.weights >= params.theta2
        else:
            keep = measure.weights >= params.theta2 / scales.log_mu1
            if scales.return_cutoff > 0 and np.any(keep):
                rng = ctx.stream_for('return', label).generator()
                no_return = escape_probabilities(measure.points[keep], measure.support,
                                                 scales.return_cutoff, ctx.cfg.mc_walks, rng)
                idx = np.flatnonzero(keep)
                keep[idx] = no_return <= (1 + params.theta1) * measure.weights[idx]
            elif scales.return_cutoff == 0:
                keep &= 1.0 <= (1 + params.theta1) * measure.weights
        return measure.support.subset(keep)

    return ctx.memo('star', label, compute)


def window_points(traj: Trajectory, A: PointSet, half_width: float) -> PointSet:
    """eta[tau_A - w, tau_A + w]; empty when eta misses A."""
    tau = traj.hitting_time(A)
    if tau is None:
        return PointSet.empty(traj.d)
    lo = max(0, int(math.ceil(tau - half_width)))
    hi = min(traj.length, int(math.floor(tau + half_width)))
    return PointSet.from_points(traj.points()[lo:hi + 1], traj.d)


def near(points: PointSet, D: PointSet, radius: float) -> np.ndarray:
    """Mask of `points` within l-infinity distance `radius` of D."""
    if len(D) == 0 or len(points) == 0:
        return np.zeros(len(points), dtype=bool)
    tree = KDTree(D.to_array())
    dist, _ = tree.query(points.to_array(), k=1, p=np.inf, distance_upper_bound=math.floor(radius) + 0.5)
    return np.isfinite(dist)


def proper_part(traj: Trajectory, A: PointSet, D: PointSet, ctx: CoarseContext) -> PointSet:
    """
    pp(eta; A, D) = eta-hat minus eta[tau_A -+ R^2/I] minus B(D, L).

    Args:
        traj: Trajectory
        A: Set whose hitting time centres the excluded window
        D: Set whose L-neighborhood is excluded
        ctx: Coarse context
    """
    star = star_proper_part(traj, ctx)
    if len(star) == 0:
        return star
    kept = star.difference(window_points(traj, A, ctx.scales.time_window))
    if len(kept) and len(D):
        kept = kept.subset(~near(kept, D, ctx.scales.L))
    return kept


def proper_parts(cloud: TrajectoryCloud, A: PointSet, D: Optional[PointSet], ctx: CoarseContext) -> List[PointSet]:
    """pp(eta; A, D) for every trajectory of the cloud, in cloud order."""
    D = D if D is not None else PointSet.empty(ctx.d)
    return [proper_part(traj, A, D, ctx) for traj in cloud]


def improper_rho_capacity(traj: Trajectory, part: PointSet, ctx: CoarseContext) -> Estimate:
    """cap^(rho)(eta-hat minus the proper part)."""
    rest = star_proper_part(traj, ctx).difference(part)
    if len(rest) == 0:
        return Estimate(0.0)
    return ctx.rho_measure(rest).total()


def interaction(first: PointSet, second: PointSet, ctx: CoarseContext) -> Estimate:
    """phi^(rho) of two proper parts; 0 when either is empty."""
    if len(first) == 0 or len(second) == 0:
        return Estimate(0.0)
    return phi_from_measures(ctx.rho_measure(first), ctx.rho_measure(second), ctx.green)
