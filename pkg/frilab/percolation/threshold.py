"""
Finite-size percolation threshold of the FRI occupied graph.

For every replica the monotone cloud gives the exact crossing level: the
smallest intensity at which the origin is joined to the faces of B(0, L).
The crossing proxy at u is then the fraction of replicas whose level is at
most u, a nondecreasing step function, and the threshold is found by
bracketing and bisecting that function.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import BudgetExhaustedError
from ..fri.sampler import MonotoneCloud
from ..laws.length_law import LengthDistribution, default_epsilon, reference_intensity
from ..lattice.points import Box, origin, pack
from ..lattice.rng import RngStream
from ..workers import WorkerPool
from .clusters import UnionFind

logger = logging.getLogger(__name__)

MIN_BOX_RADIUS = 8
MAX_DOUBLINGS = 20
RELATIVE_WIDTH = 0.05


@dataclass
class BisectionStep:
    iteration: int
    phase: str
    u: float
    proxy: float
    u_lo: float
    u_hi: float


@dataclass
class ThresholdEstimate:
    """Pseudo-critical intensity for the crossing proxy at level `target`."""
    u_hat: float
    u_lo: float
    u_hi: float
    target: float
    L: int
    replicas: int
    stderr: float
    history: List[BisectionStep] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record['history'] = [asdict(step) for step in self.history]
        return record


def asymptotic_ratio(u: float, rho: LengthDistribution, d: int, epsilon_d: float) -> float:
    """u mu_2 epsilon_d / (mu_1 (1 + log mu_1 1_{d=4})); 1 at the reference intensity."""
    if rho.mu1 <= 0:
        raise ValueError("asymptotic ratio needs mu_1 > 0")
    return u / reference_intensity(rho, d, epsilon_d)


def crossing_level(cloud: MonotoneCloud, L: int) -> float:
    """
    Smallest arrival level at which 0 connects to the faces of B(0, L).

    Edges are kept only with both endpoints in the box. Returns inf when the
    crossing does not happen up to `cloud.u_max`.
    """
    d = cloud.d
    box = Box.centered(origin(d), L)
    uf = UnionFind()
    start = int(pack(np.zeros((1, d), dtype=np.int64), d)[0])
    uf.add(start)
    trajectories, levels = cloud.by_level()
    for traj, level in zip(trajectories, levels):
        points = traj.points()
        inside = box.contains_array(points)
        if not inside.any():
            continue
        keys = traj.point_keys().tolist()
        on_face = box.on_boundary_array(points)
        for i in np.flatnonzero(on_face).tolist():
            uf.mark(keys[i])
        both = np.flatnonzero(inside[:-1] & inside[1:]).tolist()
        for i in both:
            uf.union(keys[i], keys[i + 1])
        if uf.is_marked(start):
            return float(level)
    return math.inf


def replica_crossing_level(rho: LengthDistribution, d: int, L: int, schedule: Tuple[float, ...],
                           margin: Optional[int], stream: RngStream) -> float:
    """Build one replica's monotone cloud along `schedule` and return its crossing level."""
    cloud = MonotoneCloud(rho, Box.centered(origin(d), L), stream, margin)
    for u in schedule:
        cloud.extend_to(u)
    return crossing_level(cloud, L)


def _levels(rho: LengthDistribution, d: int, L: int, replicas: int, schedule: Sequence[float],
            stream: RngStream, margin: Optional[int], pool: Optional[WorkerPool]) -> np.ndarray:
    pool = pool or WorkerPool(1)
    fn = partial(replica_crossing_level, rho, d, L, tuple(schedule), margin)
    return np.asarray(pool.map(fn, [stream.child('replica', i) for i in range(replicas)]))


def _check_box(L: int, replicas: int) -> None:
    if L < MIN_BOX_RADIUS:
        raise ValueError(f"box radius must be >= {MIN_BOX_RADIUS}, got {L}")
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")


def crossing_curve(us: Sequence[float], rho: LengthDistribution, d: int, L: int, replicas: int,
                   stream: RngStream, margin: Optional[int] = None,
                   pool: Optional[WorkerPool] = None) -> np.ndarray:
    """
    Crossing proxy at several intensities from one set of coupled replicas.

    Pathwise monotone in u: a replica that crosses at u crosses at every u' > u.
    """
    _check_box(L, replicas)
    us = np.asarray(us, dtype=float)
    if np.any(us < 0):
        raise ValueError("intensities must be nonnegative")
    u_max = float(us.max()) if len(us) else 0.0
    if u_max == 0:
        return np.zeros(len(us))
    levels = _levels(rho, d, L, replicas, [u_max], stream, margin, pool)
    return (levels[None, :] <= us[:, None]).mean(axis=1)


def crossing_proxy(u: float, rho: LengthDistribution, d: int, L: int, replicas: int,
                   stream: RngStream, margin: Optional[int] = None,
                   pool: Optional[WorkerPool] = None) -> float:
    """Fraction of replicas whose origin cluster reaches the faces of B(0, L) at intensity u."""
    return float(crossing_curve([u], rho, d, L, replicas, stream, margin, pool)[0])


def estimate_threshold(rho: LengthDistribution, d: int, L: int, replicas: int, target: float,
                       stream: RngStream, epsilon_d: Optional[float] = None,
                       margin: Optional[int] = None, pool: Optional[WorkerPool] = None,
                       relative_width: float = RELATIVE_WIDTH) -> ThresholdEstimate:
    """
    Bisect the crossing proxy for the level `target`.

    Args:
        rho: Length law
        d: Dimension
        L: Box radius (>= 8)
        replicas: Number of coupled replicas
        target: Proxy level p* in [0, 1); 0 returns the degenerate bracket [0, 0]
        stream: Random stream
        epsilon_d: Capacity constant used for the starting intensity
        margin: Window padding
        pool: Worker pool for the replicas
        relative_width: Stop when (u_hi - u_lo) / u_hi falls below this

    Returns:
        ThresholdEstimate with the full bracketing and bisection history

    Raises:
        BudgetExhaustedError: no bracket within 20 doublings (or halvings)
    """
    _check_box(L, replicas)
    if not 0 <= target < 1:
        raise ValueError(f"target level must lie in [0, 1), got {target}")
    if target == 0:
        return ThresholdEstimate(0.0, 0.0, 0.0, target, L, replicas, 0.0)
    epsilon_d = epsilon_d if epsilon_d is not None else default_epsilon(d)
    u0 = reference_intensity(rho, d, epsilon_d)
    history: List[BisectionStep] = []
    schedule = [u0]
    levels = _levels(rho, d, L, replicas, schedule, stream, margin, pool)

    def proxy(u: float) -> float:
        return float(np.mean(levels <= u))

    iteration = 0
    p0 = proxy(u0)
    history.append(BisectionStep(iteration, 'start', u0, p0, math.nan, math.nan))
    if p0 >= target:
        u_hi, u_lo = u0, u0 / 2
        while proxy(u_lo) >= target:
            iteration += 1
            history.append(BisectionStep(iteration, 'halve', u_lo, proxy(u_lo), math.nan, u_lo))
            if iteration > MAX_DOUBLINGS:
                raise BudgetExhaustedError(f"no lower bracket within {MAX_DOUBLINGS} halvings")
            u_hi, u_lo = u_lo, u_lo / 2
    else:
        u_lo, u_hi = u0, 2 * u0
        while True:
            iteration += 1
            if iteration > MAX_DOUBLINGS:
                logger.error(f"Threshold bracket not found up to u={u_lo:.4g}")
                raise BudgetExhaustedError(f"no upper bracket within {MAX_DOUBLINGS} doublings",
                                           partial={'history': [asdict(s) for s in history]})
            schedule.append(u_hi)
            levels = _levels(rho, d, L, replicas, schedule, stream, margin, pool)
            p_hi = proxy(u_hi)
            history.append(BisectionStep(iteration, 'double', u_hi, p_hi, u_lo, math.nan))
            if p_hi >= target:
                break
            u_lo, u_hi = u_hi, 2 * u_hi
    logger.info(f"Threshold bracket [{u_lo:.4g}, {u_hi:.4g}] for target {target} (L={L}, {replicas} replicas)")

    while (u_hi - u_lo) / u_hi >= relative_width:
        iteration += 1
        mid = 0.5 * (u_lo + u_hi)
        p_mid = proxy(mid)
        if p_mid >= target:
            u_hi = mid
        else:
            u_lo = mid
        history.append(BisectionStep(iteration, 'bisect', mid, p_mid, u_lo, u_hi))

    u_hat = 0.5 * (u_lo + u_hi)
    stderr = _level_stderr(levels, target, replicas)
    logger.info(f"Threshold estimate u_hat={u_hat:.4g} ± {stderr:.2g}")
    return ThresholdEstimate(u_hat, u_lo, u_hi, target, L, replicas, stderr, history)


def _level_stderr(levels: np.ndarray, target: float, replicas: int) -> float:
    """Half the spread of the level quantiles at target ± one binomial standard error."""
    se = math.sqrt(target * (1 - target) / replicas)
    finite = np.sort(levels)
    lo_q = max(target - se, 0.0)
    hi_q = min(target + se, 1.0)
    lo = finite[min(int(math.ceil(lo_q * replicas)) - 1, replicas - 1)] if lo_q > 0 else 0.0
    hi = finite[min(max(int(math.ceil(hi_q * replicas)) - 1, 0), replicas - 1)]
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return math.nan
    return float(hi - lo) / 2
