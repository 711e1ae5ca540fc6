"""
Branching processes of trajectories and hit chains.

In the process Y every trajectory eta has as offspring an independent copy
of the typical trajectories of FRI hitting range(eta) with first entry in
eta-hat. The trimmed process Y-bar keeps, from the children of its own
members, those selected by an independent thinning whose retention makes
the hit points a Poisson process of intensity u (1 - eps/2) e_eta on
eta-hat; it is therefore contained in Y generation by generation.

Hit chains follow a single line of descent: K_i is a point of zeta_i and
zeta_{i+1} is a trajectory through K_i.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..errors import BudgetExhaustedError, InvariantViolation, SamplerDiagnostic
from ..fri.cloud import CloudEntry, TrajectoryCloud
from ..fri.sampler import sample_conditioned_hit, sample_hitting
from ..lattice.points import unit_vector
from ..lattice.rng import RngStream
from ..lattice.trajectory import Trajectory, concatenate, random_steps
from ..potential.walks import escape_probabilities
from .context import CoarseContext, trajectory_label
from .proper import star_proper_part
from .typical import is_typical, restrict_typical

logger = logging.getLogger(__name__)

VARIANTS = ('full', 'diamond', 'square')
TYPICAL_FRACTION_DRAWS = 32


@dataclass
class BranchingResult:
    """Generations Y_i, trimmed generations Y-bar_i and the hit points Z_i of the trimmed children."""
    Y: List[TrajectoryCloud]
    Ybar: List[TrajectoryCloud]
    Z: List[List[np.ndarray]]
    diagnostics: List[SamplerDiagnostic] = field(default_factory=list)

    @property
    def generations(self) -> int:
        return len(self.Y) - 1

    @property
    def extinct(self) -> bool:
        return len(self.Y[-1]) == 0

    def sizes(self) -> List[Dict[str, int]]:
        return [{'generation': i, 'Y': len(y), 'Ybar': len(yb)} for i, (y, yb) in enumerate(zip(self.Y, self.Ybar))]

    def to_dict(self) -> Dict[str, Any]:
        return {'sizes': self.sizes(), 'diagnostics': [d.to_dict() for d in self.diagnostics]}


def typical_fraction(parent: Trajectory, ctx: CoarseContext, budget: int) -> float:
    """
    Estimate of mu-bar*_{x, eta}(typical), averaged over x uniform on eta-hat.
    """
    label = trajectory_label(parent)

    def compute() -> float:
        hat = star_proper_part(parent, ctx)
        if len(hat) == 0:
            return 0.0
        rng = ctx.stream_for('typical_fraction', label).generator()
        A = parent.range_set()
        points = hat.to_array()
        hits = draws = 0
        for _ in range(TYPICAL_FRACTION_DRAWS):
            x = tuple(int(c) for c in points[rng.integers(len(points))])
            traj, diagnostic, _ = sample_conditioned_hit(x, A, ctx.rho, rng, ctx.scales.band, budget)
            if traj is None:
                continue
            draws += 1
            hits += int(is_typical(traj, ctx))
        return hits / draws if draws else 0.0

    return ctx.memo('typical_fraction', label, compute)


def expected_trimmed_offspring(parent: Trajectory, u: float, epsilon: float, ctx: CoarseContext) -> float:
    """u (1 - eps/2) e_eta(eta-hat): mean number of trimmed children."""
    hat = star_proper_part(parent, ctx)
    if len(hat) == 0:
        return 0.0
    return u * (1 - epsilon / 2) * float(ctx.range_measure(parent).restricted(hat).weights.sum())


class _Branching:
    def __init__(self, u: float, ctx: CoarseContext, epsilon: float, stream: RngStream):
        self.u = u
        self.ctx = ctx
        self.epsilon = epsilon
        self.stream = stream
        self.band = ctx.scales.band
        self.band_mass = ctx.rho.band_mass(self.band)
        self.diagnostics: List[SamplerDiagnostic] = []

    def children(self, parent: Trajectory, stream: RngStream) -> TrajectoryCloud:
        """Typical trajectories hitting range(parent) first in its *-proper part."""
        hat = star_proper_part(parent, self.ctx)
        if self.u == 0 or len(hat) == 0:
            return TrajectoryCloud.empty(self.ctx.d)
        A = parent.range_set()
        fresh = sample_hitting(self.u, self.ctx.rho, A, stream, band=self.band).require_complete("branching offspring")
        return restrict_typical(fresh.restrict_hitting(A, hat), self.ctx)

    def retention(self, parent: Trajectory, entry: CloudEntry, generation: int, rng: np.random.Generator) -> float:
        ctx = self.ctx
        x = tuple(entry.provenance['hit_point'])
        m = int(entry.provenance['m'])
        e = ctx.range_measure(parent).weight(x)
        tau = typical_fraction(parent, ctx, ctx.algorithm.rejection_budget)
        no_return = 1.0 if m == 0 else float(
            escape_probabilities(np.array([x]), parent.range_set(), m, ctx.cfg.mc_walks, rng)[0])
        denominator = self.band_mass * tau * no_return
        ratio = (1 - self.epsilon / 2) * e / denominator if denominator > 0 else math.inf
        if ratio > 1:
            self.diagnostics.append(SamplerDiagnostic('branching', 'retention above 1', list(x), 0,
                                                      {'generation': generation, 'ratio': ratio, 'm': m}))
            logger.warning(f"Branching generation {generation}: retention {ratio:.3g} at {x} clipped to 1")
            return 1.0
        return ratio

    def trim(self, parent: Trajectory, kids: TrajectoryCloud, generation: int, stream: RngStream) -> np.ndarray:
        rng = stream.generator()
        keep = np.zeros(len(kids), dtype=bool)
        for k, entry in enumerate(kids.entries):
            keep[k] = rng.random() < self.retention(parent, entry, generation, rng)
        return keep


def simulate_branching(seed: TrajectoryCloud, u: float, generations: int, ctx: CoarseContext,
                       stream: RngStream, epsilon: Optional[float] = None,
                       population_cap: Optional[int] = None) -> BranchingResult:
    """
    Run Y and the trimmed Y-bar from the same offspring clouds.

    Args:
        seed: Generation 0 (typical trajectories)
        u: Intensity
        generations: Number of generations after the seed
        ctx: Coarse context
        stream: Random stream; child ('gen', i, 'parent', p) per parent
        epsilon: Trimming parameter (default from the algorithm parameters)
        population_cap: Maximum size of a generation of Y

    Returns:
        BranchingResult; Y-bar_i is a sub-multiset of Y_i for every i

    Raises:
        BudgetExhaustedError: a generation exceeds the population cap
    """
    if u < 0:
        raise ValueError(f"intensity must be nonnegative, got {u}")
    if generations < 0:
        raise ValueError(f"generations must be nonnegative, got {generations}")
    for traj in seed:
        if not is_typical(traj, ctx):
            raise ValueError("the initial generation must consist of typical trajectories")
    epsilon = ctx.algorithm.epsilon if epsilon is None else epsilon
    cap = population_cap or ctx.algorithm.population_cap
    run = _Branching(u, ctx, epsilon, stream)
    d = ctx.d
    Y, Ybar, Z = [seed], [seed], []
    trimmed = [True] * len(seed)
    for i in range(generations):
        entries: List[CloudEntry] = []
        flags: List[bool] = []
        hit_points: List[np.ndarray] = []
        for p, (parent, is_trimmed) in enumerate(zip(Y[-1], trimmed)):
            kids = run.children(parent, stream.child('gen', i, 'parent', p))
            keep = np.zeros(len(kids), dtype=bool)
            if is_trimmed:
                keep = run.trim(parent, kids, i, stream.child('gen', i, 'thin', p))
                hit_points.append(np.array([e.provenance['hit_point'] for e, k in zip(kids.entries, keep) if k],
                                           dtype=np.int64).reshape(-1, d))
            entries.extend(kids.entries)
            flags.extend(keep.tolist())
            if len(entries) > cap:
                logger.error(f"Branching generation {i + 1} exceeded {cap} trajectories")
                raise BudgetExhaustedError(f"branching population exceeded {cap}",
                                           diagnostics=run.diagnostics,
                                           partial={'sizes': [len(y) for y in Y] + [len(entries)]})
        generation = TrajectoryCloud(d, entries)
        trimmed_generation = TrajectoryCloud(d, [e for e, f in zip(entries, flags) if f])
        if not trimmed_generation.issubmultiset(generation):
            raise InvariantViolation(f"trimmed generation {i + 1} is not contained in Y")
        Y.append(generation)
        Ybar.append(trimmed_generation)
        Z.append(hit_points)
        trimmed = flags
        logger.debug(f"Branching generation {i + 1}: |Y|={len(generation)}, |Ybar|={len(trimmed_generation)}")
        if len(generation) == 0:
            break
    return BranchingResult(Y, Ybar, Z, run.diagnostics)


def _draw(points: np.ndarray, weights: np.ndarray, rng: np.random.Generator) -> tuple:
    total = weights.sum()
    if total <= 0:
        raise ValueError("cannot sample from a zero measure")
    return tuple(int(c) for c in points[rng.choice(len(points), p=weights / total)])


def _rerooted_through(x: tuple, ctx: CoarseContext, rng: np.random.Generator) -> Trajectory:
    """A trajectory of mu_x: rerooted at x with length in the band, no conditioning."""
    m, l = ctx.rho.rerooted_split(rng, 1, ctx.scales.band)
    back = Trajectory(x, random_steps(rng, ctx.d, int(m[0])))
    return concatenate(back.reversed(), Trajectory(x, random_steps(rng, ctx.d, int(l[0]))))


def typical_start(x: tuple, ctx: CoarseContext, stream: RngStream, size: int = 1,
                  budget: int = 1000) -> TrajectoryCloud:
    """
    `size` independent typical trajectories of mu_x, by rejection.

    Raises:
        BudgetExhaustedError: fewer than `size` typical draws within `budget` attempts
    """
    rng = stream.generator()
    found: List[Trajectory] = []
    attempts = 0
    while len(found) < size and attempts < budget:
        attempts += 1
        candidate = _rerooted_through(tuple(int(c) for c in x), ctx, rng)
        if is_typical(candidate, ctx):
            found.append(candidate)
    if len(found) < size:
        diagnostic = SamplerDiagnostic('typical_start', 'not enough typical trajectories', list(x), attempts,
                                       {'found': len(found), 'wanted': size})
        raise BudgetExhaustedError(f"only {len(found)} of {size} typical trajectories in {budget} attempts",
                                   diagnostics=[diagnostic])
    logger.debug(f"Typical start at {x}: {size} trajectories after {attempts} attempts")
    return TrajectoryCloud.from_trajectories(ctx.d, found)


def _equilibrium_draw(zeta: Trajectory, ctx: CoarseContext, rng: np.random.Generator,
                      proper_only: bool) -> tuple:
    measure = ctx.range_measure(zeta)
    if proper_only:
        measure = measure.restricted(star_proper_part(zeta, ctx))
    return _draw(measure.points, measure.weights, rng)


def simulate_hit_chain(traj: Trajectory, alpha: int, variant: str, ctx: CoarseContext,
                       stream: RngStream) -> np.ndarray:
    """
    One hit chain (K_0, ..., K_{alpha-1}) started from `traj`.

    Variants:
        full: K_i from the normalized equilibrium measure of zeta_i restricted
            to its *-proper part; zeta_{i+1} a typical trajectory of the band
            law first hitting range(zeta_i) at K_i
        diamond: K_i from the normalized equilibrium measure of zeta_i;
            zeta_{i+1} an unconditioned band trajectory through K_i
        square: K_0 from the normalized equilibrium measure; afterwards
            K_{i+1} = zeta_{i+1}(j) with j uniform on [0, T(zeta_{i+1})]

    Returns:
        (alpha, d) array of points
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown chain variant {variant!r}; expected one of {VARIANTS}")
    if alpha < 1:
        raise ValueError(f"chain length must be >= 1, got {alpha}")
    if variant == 'full' and not is_typical(traj, ctx):
        raise ValueError("the full chain starts from a typical trajectory")
    rng = stream.generator()
    budget = ctx.algorithm.rejection_budget
    zeta = traj
    K = _equilibrium_draw(zeta, ctx, rng, proper_only=(variant == 'full'))
    chain = [K]
    for i in range(1, alpha):
        if variant == 'full':
            zeta = _typical_conditioned_hit(K, zeta, ctx, rng, budget)
            K = _equilibrium_draw(zeta, ctx, rng, proper_only=True)
        elif variant == 'diamond':
            zeta = _rerooted_through(K, ctx, rng)
            K = _equilibrium_draw(zeta, ctx, rng, proper_only=False)
        else:
            zeta = _rerooted_through(K, ctx, rng)
            K = zeta.point(int(rng.integers(zeta.length + 1)))
        chain.append(K)
    return np.array(chain, dtype=np.int64)


def _typical_conditioned_hit(x: tuple, zeta: Trajectory, ctx: CoarseContext, rng: np.random.Generator,
                             budget: int) -> Trajectory:
    """A draw from mu-bar_{x, zeta}: conditioned band hit at x, restricted to typical trajectories."""
    A = zeta.range_set()
    attempts = 0
    while attempts < budget:
        candidate, diagnostic, _ = sample_conditioned_hit(x, A, ctx.rho, rng, ctx.scales.band, budget - attempts)
        if candidate is None:
            raise BudgetExhaustedError("hit chain: conditioned hit budget exhausted", diagnostics=[diagnostic])
        attempts += 1
        if is_typical(candidate, ctx):
            return candidate
    diagnostic = SamplerDiagnostic('hit_chain', 'no typical trajectory within budget', list(x), attempts)
    raise BudgetExhaustedError("hit chain: no typical trajectory within budget", diagnostics=[diagnostic])


def direct_square_chain(traj: Trajectory, alpha: int, ctx: CoarseContext, stream: RngStream) -> np.ndarray:
    """
    The square chain as K_i = X_{S_i}: X a walk started from the normalized
    equilibrium measure of `traj`, S_i a sum of i independent |xi - m|
    increments with (m, l) from the band law and xi uniform on [0, m + l].
    """
    if alpha < 1:
        raise ValueError(f"chain length must be >= 1, got {alpha}")
    rng = stream.generator()
    K = np.array(_equilibrium_draw(traj, ctx, rng, proper_only=False), dtype=np.int64)
    chain = [K.copy()]
    for _ in range(1, alpha):
        m, l = ctx.rho.rerooted_split(rng, 1, ctx.scales.band)
        xi = int(rng.integers(int(m[0]) + int(l[0]) + 1))
        steps = abs(xi - int(m[0]))
        if steps:
            K = Trajectory(tuple(int(c) for c in K), random_steps(rng, ctx.d, steps)).end()
            K = np.array(K, dtype=np.int64)
        chain.append(K.copy())
    return np.array(chain, dtype=np.int64)


def hit_chain_samples(traj: Trajectory, alpha: int, variant: str, n: int, ctx: CoarseContext,
                      stream: RngStream) -> np.ndarray:
    """(n, alpha, d) independent chains; variant 'direct' uses the X_{S_i} construction."""
    out = np.empty((n, alpha, ctx.d), dtype=np.int64)
    for k in range(n):
        child = stream.child('chain', k)
        if variant == 'direct':
            out[k] = direct_square_chain(traj, alpha, ctx, child)
        else:
            out[k] = simulate_hit_chain(traj, alpha, variant, ctx, child)
    return out


def chain_hit_frequency(chains: np.ndarray, ctx: CoarseContext, axis: int = 0) -> float:
    """Fraction of chains whose last point lies in B~ of the coarse vertex e_axis."""
    box = ctx.scales.inner_box(unit_vector(ctx.d, axis))
    return float(np.mean(box.contains_array(chains[:, -1, :])))
