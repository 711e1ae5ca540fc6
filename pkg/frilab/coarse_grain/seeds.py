"""
Seeds and good sequences.

A seed at a coarse vertex x is a set of beta typical trajectories that stay
in B_x and whose proper parts interact weakly: phi^(rho) below C~/I for
every pair. A sequence of layers is good with respect to a history when
every child hits exactly one parent inside the parent's proper part, no
parent has more than k_1 children, and the proper parts of each layer are
large and weakly interacting.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..errors import InvariantViolation
from ..fri.cloud import TrajectoryCloud
from ..lattice.points import Point, PointSet, union_all
from ..lattice.trajectory import Trajectory
from .context import CoarseContext
from .proper import improper_rho_capacity, interaction, proper_part, star_proper_part
from .typical import PASS, compare, is_typical

logger = logging.getLogger(__name__)


@dataclass
class Seed:
    """beta trajectories with the proper parts they were accepted with."""
    x: Point
    cloud: TrajectoryCloud
    parts: List[PointSet]

    def __len__(self) -> int:
        return len(self.cloud)

    def vertices(self) -> PointSet:
        return self.cloud.vertices()


@dataclass
class GoodSequenceVerdict:
    good: bool
    violation: Optional[Dict[str, Any]] = None
    parts: List[List[PointSet]] = field(default_factory=list)


def _weakly_interacting(first: PointSet, second: PointSet, ctx: CoarseContext) -> bool:
    bound = ctx.scales.C_tilde / ctx.scales.I
    return compare(interaction(first, second, ctx), bound, False, ctx.params.z_score) == PASS


def find_seed(cloud: TrajectoryCloud, x: Point, beta: int, ctx: CoarseContext,
              parts: Optional[Sequence[PointSet]] = None) -> Optional[Seed]:
    """
    The first qualifying beta-subset of `cloud` at coarse vertex x.

    Candidates are the typical trajectories inside B_x in canonical order;
    the search returns the lexicographically first beta-clique of the
    weak-interaction graph.

    Args:
        cloud: Trajectories to choose from
        x: Coarse vertex
        beta: Seed size
        ctx: Coarse context
        parts: Proper parts aligned with the cloud (default: *-proper parts)

    Returns:
        Seed, or None when no qualifying subset exists
    """
    if beta < 1:
        raise ValueError(f"seed size must be >= 1, got {beta}")
    trajectories = cloud.trajectories
    if parts is None:
        parts = [star_proper_part(traj, ctx) for traj in trajectories]
    if len(parts) != len(trajectories):
        raise ValueError("proper parts must align with the cloud")
    box = ctx.scales.coarse_box(x)
    candidates = [i for i in range(len(trajectories))
                  if np.all(box.contains_array(trajectories[i].points())) and is_typical(trajectories[i], ctx)]
    candidates.sort(key=lambda i: (trajectories[i].key(), i))
    if len(candidates) < beta:
        return None

    compatible: Dict[tuple, bool] = {}

    def ok(i: int, j: int) -> bool:
        if (i, j) not in compatible:
            compatible[(i, j)] = _weakly_interacting(parts[i], parts[j], ctx)
        return compatible[(i, j)]

    def extend(chosen: List[int], start: int) -> Optional[List[int]]:
        if len(chosen) == beta:
            return chosen
        for pos in range(start, len(candidates) - (beta - len(chosen)) + 1):
            i = candidates[pos]
            if all(ok(j, i) for j in chosen):
                found = extend(chosen + [i], pos + 1)
                if found is not None:
                    return found
        return None

    chosen = extend([], 0)
    if chosen is None:
        return None
    seed = Seed(x, TrajectoryCloud(cloud.d, [cloud.entries[i] for i in chosen]), [parts[i] for i in chosen])
    if ctx.algorithm.check_invariants:
        _check_seed(seed, ctx)
    return seed


def _check_seed(seed: Seed, ctx: CoarseContext) -> None:
    box = ctx.scales.coarse_box(seed.x)
    trajectories = seed.cloud.trajectories
    for a, traj in enumerate(trajectories):
        if not is_typical(traj, ctx) or not np.all(box.contains_array(traj.points())):
            raise InvariantViolation(f"seed at {seed.x} contains an atypical or out-of-box trajectory")
        for b in range(a):
            if not _weakly_interacting(seed.parts[b], seed.parts[a], ctx):
                raise InvariantViolation(f"seed at {seed.x} contains a strongly interacting pair")


def history_parts(history: Sequence[TrajectoryCloud], ctx: CoarseContext) -> List[PointSet]:
    """
    Proper parts of the last history level when no explicit parts are given:
    pp(zeta; V(D_{s-1}), V(D_0 .. D_{s-2})), or the *-proper part when s = 0.
    """
    last = history[-1]
    if len(history) < 2:
        return [star_proper_part(traj, ctx) for traj in last]
    A = history[-2].vertices()
    D = union_all([level.vertices() for level in history[:-2]], ctx.d)
    return [proper_part(traj, A, D, ctx) for traj in last]


def _violation(layer: int, bullet: int, reason: str, **details: Any) -> Dict[str, Any]:
    return {'layer': layer, 'bullet': bullet, 'reason': reason, **details}


def check_good_sequence(layers: Sequence[TrajectoryCloud], history: Sequence[TrajectoryCloud],
                        ctx: CoarseContext, anchor_parts: Optional[Sequence[PointSet]] = None
                        ) -> GoodSequenceVerdict:
    """
    Is (A_1, ..., A_k) good with respect to (D_0, ..., D_s), with A_0 = D_s?

    Within each layer the parent structure (at most one parent per child,
    landing in that parent's proper part; at most k_1 children per parent) is checked before the
    capacity and interaction bounds.

    Args:
        layers: A_1, ..., A_k
        history: D_0, ..., D_s (nonempty when layers are given)
        ctx: Coarse context
        anchor_parts: Proper parts of the trajectories of A_0

    Returns:
        GoodSequenceVerdict with the first violation and the proper parts of
        every checked layer
    """
    if not layers:
        return GoodSequenceVerdict(True)
    if not history:
        raise ValueError("a nonempty sequence needs a nonempty history")
    d = ctx.d
    scales, params = ctx.scales, ctx.params
    parent_parts = list(anchor_parts) if anchor_parts is not None else history_parts(history, ctx)
    parents = history[-1]
    if len(parent_parts) != len(parents):
        raise ValueError("anchor parts must align with the last history level")
    avoided = union_all([level.vertices() for level in history], d)
    cap_bound = 4 * scales.C_tilde / scales.I ** 0.5
    all_parts: List[List[PointSet]] = []
    for i, layer in enumerate(layers, start=1):
        parent_list = parents.trajectories
        parent_ranges = [p.range_set() for p in parent_list]
        children = [0] * len(parent_list)
        for c, child in enumerate(layer):
            hit = [j for j, rng in enumerate(parent_ranges) if child.hits(rng)]
            if len(hit) > 1:
                return GoodSequenceVerdict(False, _violation(i, 2, 'child hits more than one parent',
                                                             child=c, parents_hit=len(hit)), all_parts)
            if not hit:
                continue
            j = hit[0]
            landing = child.point(child.hitting_time(parent_ranges[j]))
            if landing not in parent_parts[j]:
                return GoodSequenceVerdict(False, _violation(i, 2, 'child enters its parent outside the proper part',
                                                             child=c, parent=j, landing=list(landing)), all_parts)
            children[j] += 1
        crowded = [j for j, n in enumerate(children) if n > ctx.algorithm.k1]
        if crowded:
            return GoodSequenceVerdict(False, _violation(i, 3, 'parent has more than k1 children',
                                                         parent=crowded[0], children=children[crowded[0]]),
                                       all_parts)

        A = parents.vertices()
        parts = [proper_part(traj, A, avoided, ctx) for traj in layer]
        all_parts.append(parts)
        for c, (traj, part) in enumerate(zip(layer, parts)):
            improper = improper_rho_capacity(traj, part, ctx)
            if compare(improper, cap_bound, False, params.z_score) != PASS:
                return GoodSequenceVerdict(False, _violation(i, 1, 'improper part has large rho-capacity', child=c,
                                                             capacity=improper.to_dict(), bound=cap_bound), all_parts)
        for a in range(len(parts)):
            for b in range(a):
                if not _weakly_interacting(parts[b], parts[a], ctx):
                    return GoodSequenceVerdict(False, _violation(i, 1, 'proper parts interact strongly',
                                                                 pair=[b, a]), all_parts)
        avoided = avoided.union(layer.vertices())
        parents, parent_parts = layer, parts
    return GoodSequenceVerdict(True, None, all_parts)
