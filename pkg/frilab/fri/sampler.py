"""
FRI samplers.

Two constructions of the same Poisson point process:

- `sample_window`: every vertex of a (padded) window emits Poisson(u/(mu_1+1))
  walks with i.i.d. rho-distributed lengths.
- `sample_hitting`: the trajectories that hit a finite set A, drawn directly
  from the rerooted law. Each point x of A proposes Poisson(u * band mass)
  rerooted (m, l) splits; a proposal survives when its m-step backward walk
  avoids A after time 0, which thins the proposals to intensity
  u * e_A^(rho)(x) exactly.

`MonotoneCloud` gives every trajectory an arrival level so that clouds at
all intensities are realized together and nested.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import InvariantViolation, MemoryCapError, SamplerDiagnostic
from ..laws.length_law import Band, LengthDistribution
from ..lattice.points import Box, PointLike, PointSet, as_point
from ..lattice.rng import RngStream
from ..lattice.trajectory import Trajectory, concatenate, random_steps
from ..models.params import PotentialConfig
from ..potential.estimators import Estimate, rho_capacity
from ..workers import WorkerPool
from .cloud import CloudEntry, TrajectoryCloud

logger = logging.getLogger(__name__)

MEMORY_CAP_STEPS = 10 ** 8
REJECTION_BUDGET = 10 ** 4
MARGIN_QUANTILE = 0.999


def default_margin(rho: LengthDistribution) -> int:
    """4 * sqrt of the 0.999-quantile of rho."""
    return int(math.ceil(4.0 * math.sqrt(rho.quantile(MARGIN_QUANTILE))))


def _check_intensity(u: float) -> float:
    if u < 0 or not math.isfinite(u):
        raise ValueError(f"intensity must be finite and nonnegative, got {u}")
    return float(u)


def _sample_slab(task: Tuple[float, LengthDistribution, Box, int, RngStream]) -> List[CloudEntry]:
    """All walks emitted by the vertices of one first-coordinate slab."""
    rate, rho, box, x1, stream = task
    rng = stream.generator()
    lower, upper = box.lower, box.upper
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(lower[1:], upper[1:])]
    grid = np.meshgrid(*axes, indexing='ij')
    rest = np.stack([g.ravel() for g in grid], axis=1)
    vertices = np.concatenate([np.full((len(rest), 1), x1, dtype=np.int64), rest], axis=1)
    counts = rng.poisson(rate, size=len(vertices))
    total = int(counts.sum())
    if total == 0:
        return []
    lengths = rho.sample(rng, total)
    codes = random_steps(rng, box.d, int(lengths.sum()))
    origins = np.repeat(vertices, counts, axis=0)
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    entries = []
    for i in range(total):
        origin = as_point(origins[i])
        traj = Trajectory(origin, codes[bounds[i]:bounds[i + 1]])
        entries.append(CloudEntry(traj, {'origin': list(origin)}))
    return entries


def sample_window(u: float, rho: LengthDistribution, window: Box, stream: RngStream,
                  margin: Optional[int] = None, pool: Optional[WorkerPool] = None) -> TrajectoryCloud:
    """
    FRI restricted to trajectories started in the padded window.

    Args:
        u: Intensity
        rho: Length law
        window: Analysis window; trajectories are started from window.padded(margin)
        stream: Random stream; one child per first-coordinate slab
        margin: Padding (default `default_margin(rho)`)
        pool: Worker pool for the slabs

    Returns:
        TrajectoryCloud, trajectories kept whole even where they leave the window
    """
    u = _check_intensity(u)
    d = window.d
    if u == 0:
        return TrajectoryCloud.empty(d)
    margin = default_margin(rho) if margin is None else int(margin)
    box = window.padded(margin)
    rate = u / (rho.mu1 + 1.0)
    expected_steps = rate * box.volume() * (rho.mu1 + 1.0)
    if expected_steps > MEMORY_CAP_STEPS:
        raise MemoryCapError(f"window sample needs ~{expected_steps:.3g} stored points "
                             f"(cap {MEMORY_CAP_STEPS}); shrink the window or the intensity")
    tasks = [(rate, rho, box, int(x1), stream.child('slab', int(x1)))
             for x1 in range(int(box.lower[0]), int(box.upper[0]) + 1)]
    pool = pool or WorkerPool(1)
    slabs = pool.map(_sample_slab, tasks)
    entries = [entry for slab in slabs for entry in slab]
    logger.debug(f"Window sample u={u:.4g} on {box.side}^{d}: {len(entries)} trajectories")
    return TrajectoryCloud(d, entries)


def _backward_avoids(x: Tuple[int, ...], codes: np.ndarray, A: PointSet) -> Tuple[Trajectory, bool]:
    back = Trajectory(x, codes)
    return back, not bool(np.any(A.contains(back.points()[1:])))


def _assemble(back: Trajectory, forward_codes: np.ndarray) -> Trajectory:
    """Reversed backward path (ending at the hit point) followed by the forward path."""
    return concatenate(back.reversed(), Trajectory(back.start, forward_codes))


def _check_first_entry(traj: Trajectory, A: PointSet, m: int, x: Tuple[int, ...]) -> None:
    if traj.hitting_time(A) != m or traj.point(m) != x:
        raise InvariantViolation(f"sampled trajectory does not first enter A at {x} at time {m}")


def sample_hitting(u: float, rho: LengthDistribution, A: PointSet, stream: RngStream,
                   band: Band = None) -> TrajectoryCloud:
    """
    The trajectories of FRI(u, rho) that hit A, sampled without a window.

    Args:
        u: Intensity
        rho: Length law
        A: Finite nonempty set
        stream: Random stream; one child per point of A
        band: Optional inclusive [T_lo, T_hi] range for the trajectory length

    Returns:
        TrajectoryCloud with provenance {hit_point, m, l}; every trajectory
        first enters A at its hit point at time m
    """
    u = _check_intensity(u)
    if len(A) == 0:
        raise ValueError("sample_hitting needs a nonempty set")
    d = A.d
    entries: List[CloudEntry] = []
    if u == 0:
        return TrajectoryCloud(d)
    rate = u * rho.band_mass(band)
    for x in A:
        rng = stream.child('hit', x).generator()
        n = int(rng.poisson(rate))
        if n == 0:
            continue
        m, l = rho.rerooted_split(rng, n, band)
        for mi, li in zip(m, l):
            back, ok = _backward_avoids(x, random_steps(rng, d, int(mi)), A)
            forward = random_steps(rng, d, int(li))
            if not ok:
                continue
            traj = _assemble(back, forward)
            _check_first_entry(traj, A, int(mi), x)
            entries.append(CloudEntry(traj, {'hit_point': list(x), 'm': int(mi), 'l': int(li)}))
    logger.debug(f"Hitting sample u={u:.4g} |A|={len(A)}: {len(entries)} trajectories")
    return TrajectoryCloud(d, entries)


def sample_conditioned_hit(x: PointLike, A: PointSet, rho: LengthDistribution, rng: np.random.Generator,
                           band: Band = None, budget: int = REJECTION_BUDGET
                           ) -> Tuple[Optional[Trajectory], Optional[SamplerDiagnostic], Dict[str, int]]:
    """
    One trajectory from the rerooted law conditioned to first hit A at x.

    Proposes (m, l) splits and backward walks until the backward walk avoids
    A after time 0.

    Args:
        x: Hit point, must lie in A
        A: Finite set
        rho: Length law
        rng: Generator
        band: Optional length band
        budget: Maximum number of proposals

    Returns:
        (trajectory, None, {m, l}) on success, or (None, diagnostic, {}) when
        the budget runs out
    """
    x = as_point(x)
    if x not in A:
        raise ValueError(f"hit point {x} is not in A")
    d = A.d
    attempts = 0
    batch = 64
    while attempts < budget:
        m, l = rho.rerooted_split(rng, min(batch, budget - attempts), band)
        for mi, li in zip(m, l):
            attempts += 1
            back, ok = _backward_avoids(x, random_steps(rng, d, int(mi)), A)
            if ok:
                traj = _assemble(back, random_steps(rng, d, int(li)))
                _check_first_entry(traj, A, int(mi), x)
                return traj, None, {'m': int(mi), 'l': int(li)}
    logger.warning(f"Conditioned hit at {x}: no acceptance within {budget} proposals")
    diagnostic = SamplerDiagnostic('conditioned_hit', 'rejection budget exhausted', list(x), attempts,
                                   {'set_size': len(A), 'band': list(band) if band else None})
    return None, diagnostic, {}


def expected_hit_count(u: float, rho: LengthDistribution, A: PointSet,
                       cfg: Optional[PotentialConfig] = None, stream: Optional[RngStream] = None) -> Estimate:
    """E[|X[A]|] = u cap^(rho)(A)."""
    cap = rho_capacity(A, rho, cfg, stream)
    return Estimate(u * cap.value, u * cap.stderr, u * cap.bias_bound, cap.n_samples)


def thin(cloud: TrajectoryCloud, p: float, stream: RngStream) -> TrajectoryCloud:
    """Keep each trajectory independently with probability p."""
    if not 0 <= p <= 1:
        raise ValueError(f"retention probability must lie in [0, 1], got {p}")
    keep = stream.generator().random(len(cloud)) < p
    return cloud.filter(keep)


class MonotoneCloud:
    """
    FRI at all intensities up to `u_max` at once.

    Each trajectory carries an arrival level v; the cloud at intensity u is
    {v <= u}, so clouds are nested in u by construction. The level range is
    grown in layers: layer k covers (u_{k-1}, u_k] and is sampled
    independently from its own child stream.
    """

    def __init__(self, rho: LengthDistribution, window: Box, stream: RngStream,
                 margin: Optional[int] = None, pool: Optional[WorkerPool] = None):
        self.rho = rho
        self.window = window
        self.stream = stream
        self.margin = default_margin(rho) if margin is None else int(margin)
        self.pool = pool
        self.u_max = 0.0
        self._entries: List[CloudEntry] = []
        self._levels: List[np.ndarray] = []

    @property
    def d(self) -> int:
        return self.window.d

    @property
    def n_layers(self) -> int:
        return len(self._levels)

    def levels(self) -> np.ndarray:
        return np.concatenate(self._levels) if self._levels else np.zeros(0)

    def extend_to(self, u: float) -> "MonotoneCloud":
        u = _check_intensity(u)
        if u <= self.u_max:
            return self
        k = self.n_layers
        layer = sample_window(u - self.u_max, self.rho, self.window, self.stream.child('layer', k),
                              self.margin, self.pool)
        unit = 1.0 - self.stream.child('layer', k, 'levels').generator().random(len(layer))
        levels = self.u_max + (u - self.u_max) * unit
        for entry, v in zip(layer.entries, levels):
            entry.provenance['level'] = float(v)
        self._entries.extend(layer.entries)
        self._levels.append(levels)
        logger.debug(f"Monotone cloud layer {k}: ({self.u_max:.4g}, {u:.4g}] with {len(layer)} trajectories")
        self.u_max = u
        return self

    def at(self, u: float) -> TrajectoryCloud:
        """The cloud at intensity u (extending the level range if needed)."""
        self.extend_to(u)
        levels = self.levels()
        return TrajectoryCloud(self.d, [e for e, v in zip(self._entries, levels) if v <= u])

    def by_level(self) -> Tuple[List[Trajectory], np.ndarray]:
        """All trajectories sorted by arrival level, with their levels."""
        levels = self.levels()
        order = np.argsort(levels, kind='stable')
        return [self._entries[i].trajectory for i in order], levels[order]
