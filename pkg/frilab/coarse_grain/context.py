"""
Shared state of a coarse-grained computation.

Potential-theoretic quantities of a trajectory (its equilibrium measure,
*-proper part, typicality verdict) are needed again and again by the
classifier, the proper parts, the seed search and the good-sequence check.
They are computed once per trajectory from a stream labelled by the
trajectory itself, so results do not depend on the order of the calls.
"""

import hashlib
import logging
from typing import Any, Callable, Dict, Hashable, Optional

from ..laws.length_law import LengthDistribution
from ..lattice.points import PointSet, global_frame
from ..lattice.rng import RngStream
from ..lattice.trajectory import Trajectory
from ..models.params import AlgorithmParams, PotentialConfig, TypicalityParams
from ..potential.estimators import EquilibriumMeasure, GreenTable, equilibrium_measure, green_table, rho_equilibrium
from .scales import Scales, derive_scales

logger = logging.getLogger(__name__)

COARSE_POTENTIAL = PotentialConfig(mc_walks=64, escape_cutoff_steps=1024)


def trajectory_label(traj: Trajectory) -> str:
    """Stable digest of a trajectory, usable as a stream label."""
    length, start, steps = traj.key()
    h = hashlib.blake2b(digest_size=12)
    h.update(f"{length}:{start}".encode('utf-8'))
    h.update(steps)
    return h.hexdigest()


def set_label(points: PointSet) -> str:
    h = hashlib.blake2b(digest_size=12)
    h.update(str(points.d).encode('utf-8'))
    if points.frame != global_frame(points.d):
        h.update(repr(points.frame).encode('utf-8'))
    h.update(points.keys.tobytes())
    return h.hexdigest()


class CoarseContext:
    """
    Parameters, scales and memoized estimates for one experiment.

    Args:
        rho: Length law
        d: Dimension
        params: Typicality constants
        stream: Root stream of the potential estimates
        cfg: Potential estimator settings
        algorithm: Round parameters (for gamma)
        epsilon_d: Capacity constant for d >= 5
        scales: Precomputed scales (derived from rho when omitted)
    """

    def __init__(self, rho: LengthDistribution, d: int, params: Optional[TypicalityParams],
                 stream: RngStream, cfg: Optional[PotentialConfig] = None,
                 algorithm: Optional[AlgorithmParams] = None, epsilon_d: Optional[float] = None,
                 scales: Optional[Scales] = None):
        self.rho = rho
        self.d = d
        self.params = params or TypicalityParams()
        self.algorithm = algorithm or AlgorithmParams()
        self.cfg = cfg or COARSE_POTENTIAL
        self.scales = scales or derive_scales(rho, d, self.params, self.algorithm, epsilon_d)
        self.stream = stream
        self._caches: Dict[str, Dict[Hashable, Any]] = {}

    def __repr__(self) -> str:
        return f"CoarseContext(d={self.d}, R={self.scales.R}, cached={ {k: len(v) for k, v in self._caches.items()} })"

    def memo(self, name: str, key: Hashable, compute: Callable[[], Any]) -> Any:
        cache = self._caches.setdefault(name, {})
        if key not in cache:
            cache[key] = compute()
        return cache[key]

    def stream_for(self, purpose: str, label: str) -> RngStream:
        return self.stream.child(purpose, label)

    def range_measure(self, traj: Trajectory) -> EquilibriumMeasure:
        """e_eta on range(eta)."""
        label = trajectory_label(traj)
        return self.memo('range_measure', label, lambda: equilibrium_measure(
            traj.range_set(), self.cfg, self.stream_for('range_measure', label)))

    def set_measure(self, points: PointSet) -> EquilibriumMeasure:
        label = set_label(points)
        return self.memo('set_measure', label, lambda: equilibrium_measure(
            points, self.cfg, self.stream_for('set_measure', label)))

    def rho_measure(self, points: PointSet) -> EquilibriumMeasure:
        """e^(rho) on a finite set."""
        label = set_label(points)
        return self.memo('rho_measure', label, lambda: rho_equilibrium(
            points, self.rho, None, self.cfg, self.stream_for('rho_measure', label)))

    @property
    def green(self) -> GreenTable:
        return green_table(self.d, self.cfg.green_table_radius, self.cfg.tolerance)
