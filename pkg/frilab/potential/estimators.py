"""
Potential theory of the simple random walk on Z^d, d >= 4.

Green's function, equilibrium measures, capacities (plain, truncated, rho-
and size-biased kappa), hitting probabilities and the pair functional
phi^(rho). Each estimator either solves a Dirichlet problem on a ball
(`exact-dirichlet`) or runs escape walks (`monte-carlo`), and reports its
statistical error and a bound on the truncation bias.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..laws.length_law import LengthDistribution
from ..lattice.points import PointLike, PointSet, as_point_array, linf_norm, validate_dimension
from ..lattice.rng import RngStream
from ..lattice.trajectory import sample_srw
from ..models.params import PotentialConfig
from ..workers import WorkerPool
from . import dirichlet
from .walks import escape_indicators, escape_probabilities, first_entry_times, visit_counts

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = PotentialConfig()
GREEN_TABLE_RADIUS = {4: 12, 5: 8, 6: 6}
MIN_EPSILON_LENGTH = 1000


@dataclass
class Estimate:
    """A Monte Carlo or solver estimate with its error budget."""
    value: float
    stderr: float = 0.0
    bias_bound: float = 0.0
    n_samples: int = 0

    def interval(self, z: float = 3.0, with_bias: bool = True) -> Tuple[float, float]:
        spread = z * self.stderr + (self.bias_bound if with_bias else 0.0)
        return self.value - spread, self.value + spread

    def to_dict(self) -> Dict[str, float]:
        return {'estimate': self.value, 'stderr': self.stderr,
                'bias_bound': self.bias_bound, 'n_samples': self.n_samples}


@dataclass
class EquilibriumMeasure:
    """Per-point escape weights on a finite set A; total mass is cap(A)."""
    support: PointSet
    weights: np.ndarray
    stderr: np.ndarray
    bias_bound: float = 0.0
    n_samples: int = 0

    @property
    def points(self) -> np.ndarray:
        return self.support.to_array()

    def total(self) -> Estimate:
        return Estimate(float(self.weights.sum()), float(np.sqrt(np.sum(self.stderr ** 2))),
                        min(float(self.weights.sum()), self.bias_bound * len(self.support)),
                        self.n_samples)

    def weight(self, x: PointLike) -> float:
        idx = int(self.support.locate(np.asarray(x, dtype=np.int64).reshape(1, self.support.d))[0])
        if idx < 0:
            return 0.0
        return float(self.weights[idx])

    def normalized(self) -> np.ndarray:
        """e_A^0 = e_A / cap(A) (zero vector if cap vanishes)."""
        total = self.weights.sum()
        return self.weights / total if total > 0 else np.zeros_like(self.weights)

    def restricted(self, subset: PointSet) -> "EquilibriumMeasure":
        """The measure restricted to `subset` (not renormalized)."""
        mask = subset.contains(self.support.to_array())
        return EquilibriumMeasure(self.support.subset(mask),
                                  self.weights[mask], self.stderr[mask], self.bias_bound, self.n_samples)


def _cfg(cfg: Optional[PotentialConfig]) -> PotentialConfig:
    return cfg if cfg is not None else DEFAULT_CONFIG


def green_tail_bound(d: int, steps: int) -> float:
    """Bound on sum_{n > steps} p_n(x, y) from the local limit theorem (factor 2 margin)."""
    steps = max(steps, 1)
    return 2.0 * (d / (2 * math.pi)) ** (d / 2) * steps ** (1 - d / 2) / (d / 2 - 1)


def _center_and_radius(A: PointSet) -> Tuple[np.ndarray, int]:
    pts = A.to_array()
    center = (pts.min(axis=0) + pts.max(axis=0)) // 2
    return center, int(np.max(np.abs(pts - center)))


def _bernoulli_stderr(p: np.ndarray, n: int) -> np.ndarray:
    return np.sqrt(np.clip(p * (1 - p), 0, None) / max(n, 1))


def _escape_means(points: np.ndarray, A: PointSet, budgets, walks: int,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    means = escape_probabilities(points, A, budgets, walks, rng)
    return means, _bernoulli_stderr(means, walks)


def green(x: PointLike, y: PointLike, cfg: Optional[PotentialConfig] = None,
          stream: Optional[RngStream] = None) -> Estimate:
    """
    g(x, y) = E^x[number of visits to y].

    Args:
        x: Start point
        y: Target point
        cfg: Method and accuracy settings
        stream: Random stream (Monte Carlo method only)

    Returns:
        Estimate; the exact method reports the ball-truncation bias
    """
    cfg = _cfg(cfg)
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    d = validate_dimension(x.size)
    dist = linf_norm(x - y)
    if cfg.method == 'exact-dirichlet':
        radius = cfg.annulus_radius or 4 * dist + 16
        if radius <= dist:
            raise ValueError(f"annulus radius {radius} must exceed |x - y| = {dist}")
        solution = dirichlet.green_column(d, y, radius, cfg.tolerance)
        value = float(solution.value_at(x)[0])
        return Estimate(value, 0.0, dirichlet.exit_bias_bound(d, radius + 1), 0)
    counts = visit_counts(x, y, cfg.escape_cutoff_steps, cfg.mc_walks, stream.generator())
    stderr = float(counts.std(ddof=1) / math.sqrt(len(counts))) if len(counts) > 1 else 0.0
    return Estimate(float(counts.mean()), stderr, green_tail_bound(d, cfg.escape_cutoff_steps), len(counts))


def equilibrium_measure(A: PointSet, cfg: Optional[PotentialConfig] = None,
                        stream: Optional[RngStream] = None) -> EquilibriumMeasure:
    """
    e_A(x) = P^x[H~_A = infinity] for x in A.

    The exact method replaces infinity by the exit time of a ball of radius r
    around A; the Monte Carlo method by `escape_cutoff_steps` steps. Both
    overestimate, by at most the reported per-point bias bound.
    """
    cfg = _cfg(cfg)
    if len(A) == 0:
        raise ValueError("equilibrium measure of an empty set")
    d = A.d
    if cfg.method == 'exact-dirichlet':
        center, reach = _center_and_radius(A)
        radius = cfg.annulus_radius or 4 * A.diameter() + 16
        if radius <= reach:
            raise ValueError(f"annulus radius {radius} must exceed the set's extent {reach}")
        solution = dirichlet.hitting_before_exit(A, radius, center, cfg.tolerance)
        weights = np.clip(dirichlet.escape_before_exit(A, solution), 0.0, 1.0)
        cap_upper = min(float(len(A)), float(weights.sum()))
        bias = cap_upper * dirichlet.exit_bias_bound(d, radius + 1 - reach)
        return EquilibriumMeasure(A, weights, np.zeros(len(A)), bias, 0)
    means, stderr = _escape_means(A.to_array(), A, cfg.escape_cutoff_steps, cfg.mc_walks,
                                  stream.generator())
    bias = min(1.0, len(A) * green_tail_bound(d, cfg.escape_cutoff_steps))
    return EquilibriumMeasure(A, means, stderr, bias, cfg.mc_walks)


def normalized_equilibrium(A: PointSet, cfg: Optional[PotentialConfig] = None,
                           stream: Optional[RngStream] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(points, e_A^0 weights)."""
    measure = equilibrium_measure(A, cfg, stream)
    return measure.points, measure.normalized()


def _subsampled_sum(A: PointSet, cfg: PotentialConfig, rng: np.random.Generator,
                    budgets_for) -> Estimate:
    """
    sum_{x in A} P^x[H~_A > m_x] with per-walk budgets from `budgets_for(n)`.

    Sets larger than `subsample_points` are estimated from a uniform subsample
    scaled by |A| / K.
    """
    n = len(A)
    points = A.to_array()
    K = min(n, cfg.subsample_points)
    if K < n:
        points = points[np.sort(rng.choice(n, size=K, replace=False))]
    walks = cfg.mc_walks
    starts = np.repeat(points, walks, axis=0)
    esc = escape_indicators(starts, A, budgets_for(len(starts), rng), rng).reshape(K, walks)
    per_point = esc.mean(axis=1)
    if K < n:
        value = n * per_point.mean()
        stderr = n * per_point.std(ddof=1) / math.sqrt(K) if K > 1 else float(n)
    else:
        value = per_point.sum()
        stderr = math.sqrt(float(np.sum(_bernoulli_stderr(per_point, walks) ** 2)))
    return Estimate(float(value), float(stderr), 0.0, K * walks)


def truncated_capacity(A: PointSet, cutoff_steps: int, cfg: Optional[PotentialConfig] = None,
                       stream: Optional[RngStream] = None) -> Estimate:
    """
    cap(A, s) = sum_{x in A} P^x[H~_A > s].

    Args:
        A: Finite set
        cutoff_steps: s >= 0; s = 0 gives |A| exactly
        cfg: Walk counts and subsampling
        stream: Random stream

    Returns:
        Unbiased Monte Carlo estimate
    """
    cfg = _cfg(cfg)
    if cutoff_steps < 0:
        raise ValueError(f"cutoff must be nonnegative, got {cutoff_steps}")
    if cutoff_steps == 0 or len(A) == 0:
        return Estimate(float(len(A)))
    return _subsampled_sum(A, cfg, stream.generator(), lambda n, rng: cutoff_steps)


def capacity(A: PointSet, cfg: Optional[PotentialConfig] = None,
             stream: Optional[RngStream] = None) -> Estimate:
    """cap(A) = sum_x e_A(x)."""
    cfg = _cfg(cfg)
    if len(A) == 0:
        raise ValueError("capacity of an empty set")
    if cfg.method == 'exact-dirichlet' or len(A) <= cfg.subsample_points:
        return equilibrium_measure(A, cfg, stream).total()
    estimate = truncated_capacity(A, cfg.escape_cutoff_steps, cfg, stream)
    estimate.bias_bound = min(estimate.value, len(A) * min(1.0, len(A) * green_tail_bound(A.d, cfg.escape_cutoff_steps)))
    return estimate


def _split_budgets(rho: LengthDistribution):
    def budgets(n: int, rng: np.random.Generator) -> np.ndarray:
        m, _ = rho.rerooted_split(rng, n)
        return m
    return budgets


def rho_equilibrium(A: PointSet, rho: LengthDistribution, x: Optional[PointLike] = None,
                    cfg: Optional[PotentialConfig] = None,
                    stream: Optional[RngStream] = None):
    """
    e_A^(rho)(x) = sum_m mu_0^(m) / (mu_1 + 1) P^x[H~_A > m].

    m is drawn from the normalized tail weights and the walk is run for m
    steps. Returns a float for a single x, or the full EquilibriumMeasure when
    x is None.
    """
    cfg = _cfg(cfg)
    if len(A) == 0:
        raise ValueError("rho-equilibrium of an empty set")
    rng = stream.generator()
    points = A.to_array() if x is None else as_point_array([x], A.d)
    if x is not None and tuple(x) not in A:
        return 0.0
    walks = cfg.mc_walks
    starts = np.repeat(points, walks, axis=0)
    m, _ = rho.rerooted_split(rng, len(starts))
    esc = escape_indicators(starts, A, m, rng).reshape(len(points), walks)
    means = esc.mean(axis=1)
    if x is not None:
        return float(means[0])
    return EquilibriumMeasure(A, means, _bernoulli_stderr(means, walks), 0.0, walks)


def rho_capacity(A: PointSet, rho: LengthDistribution, cfg: Optional[PotentialConfig] = None,
                 stream: Optional[RngStream] = None) -> Estimate:
    """cap^(rho)(A) = sum_x e_A^(rho)(x)."""
    cfg = _cfg(cfg)
    if len(A) == 0:
        raise ValueError("rho-capacity of an empty set")
    return _subsampled_sum(A, cfg, stream.generator(), _split_budgets(rho))


def rho_capacity_upper_bound(A: PointSet, rho: LengthDistribution, cutoff_steps: int,
                             cfg: Optional[PotentialConfig] = None,
                             stream: Optional[RngStream] = None) -> Estimate:
    """
    |A| * W(m < s) + cap(A, s), an upper bound on cap^(rho)(A) for any s,
    where W(m < s) is the tail-weight mass below the cutoff.
    """
    below = float(np.sum(rho.tail_weight(np.arange(cutoff_steps)))) if cutoff_steps > 0 else 0.0
    truncated = truncated_capacity(A, cutoff_steps, cfg, stream)
    return Estimate(len(A) * below + truncated.value, truncated.stderr, 0.0, truncated.n_samples)


def _kappa_budgets(rho: LengthDistribution):
    values, _ = rho.table()
    ms = np.arange(int(values[-1]) + 1)
    weights = np.array([rho.tail_moment(1, int(m)) for m in ms])
    probs = weights / weights.sum()

    def budgets(n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(ms, size=n, p=probs)
    return budgets


def kappa_rho(A: PointSet, rho: LengthDistribution, cfg: Optional[PotentialConfig] = None,
              stream: Optional[RngStream] = None, method: str = 'direct') -> Estimate:
    """
    kappa^(rho)(A) = sum_x sum_m mu_1^(m) / mu_2 P^x[H~_A > m].

    The weights mu_1^(m) sum to mu_2 + mu_1, so kappa equals
    (1 + mu_1/mu_2) cap^(rho_hat)(A) for the size-biased law rho_hat.
    `method='direct'` samples m from the mu_1^(m) weights;
    `method='size-biased'` goes through rho_capacity(A, rho_hat).
    """
    cfg = _cfg(cfg)
    if rho.mu2 == 0:
        raise ValueError("kappa is undefined when mu_2 = 0")
    if len(A) == 0:
        raise ValueError("kappa of an empty set")
    factor = 1.0 + rho.mu1 / rho.mu2
    if method == 'size-biased':
        base = rho_capacity(A, rho.size_biased(), cfg, stream)
    elif method == 'direct':
        base = _subsampled_sum(A, cfg, stream.generator(), _kappa_budgets(rho))
    else:
        raise ValueError(f"unknown kappa method: {method}")
    return Estimate(factor * base.value, factor * base.stderr, 0.0, base.n_samples)


def hitting_probability(x: PointLike, A: PointSet, cfg: Optional[PotentialConfig] = None,
                        stream: Optional[RngStream] = None, decomposed: bool = False) -> Estimate:
    """
    h(x, A) = P^x[H_A < infinity].

    Args:
        x: Start point
        A: Finite nonempty target
        cfg: Method settings
        stream: Random stream
        decomposed: Use the last-exit form sum_y g(x, y) e_A(y) instead

    Returns:
        Estimate of the hitting probability
    """
    cfg = _cfg(cfg)
    if len(A) == 0:
        raise ValueError("hitting probability of an empty set")
    if tuple(x) in A:
        return Estimate(1.0)
    d = A.d
    x_arr = np.asarray(x, dtype=np.int64)
    if decomposed:
        measure = equilibrium_measure(A, cfg, stream.child('equilibrium') if stream else None)
        value, var, bias = 0.0, 0.0, 0.0
        for i, y in enumerate(measure.points):
            g = green(x_arr, y, cfg, stream.child('green', i) if stream else None)
            e = float(measure.weights[i])
            value += g.value * e
            var += (g.stderr * e) ** 2 + (g.value * measure.stderr[i]) ** 2
            bias += g.bias_bound * e + g.value * measure.bias_bound
        return Estimate(value, math.sqrt(var), bias, measure.n_samples)
    if cfg.method == 'exact-dirichlet':
        center, reach = _center_and_radius(A)
        x_reach = linf_norm(x_arr - center)
        radius = cfg.annulus_radius or 4 * max(A.diameter(), x_reach) + 16
        if radius <= max(reach, x_reach):
            raise ValueError(f"annulus radius {radius} must contain A and x")
        solution = dirichlet.hitting_before_exit(A, radius, center, cfg.tolerance)
        bias = len(A) * dirichlet.exit_bias_bound(d, radius + 1 - reach)
        return Estimate(float(solution.value_at(x_arr)[0]), 0.0, min(1.0, bias), 0)
    starts = np.repeat(x_arr.reshape(1, d), cfg.mc_walks, axis=0)
    hit = first_entry_times(starts, A, cfg.escape_cutoff_steps, stream.generator(), start_time=0) >= 0
    p = float(hit.mean())
    bias = min(1.0, len(A) * green_tail_bound(d, cfg.escape_cutoff_steps))
    return Estimate(p, float(_bernoulli_stderr(np.array(p), cfg.mc_walks)), bias, cfg.mc_walks)


@dataclass
class GreenTable:
    """
    g(0, z) tabulated on B(0, radius) by one Dirichlet solve.

    Lookups outside the ball fall back to a_d |z|_2^(2-d).
    """
    d: int
    radius: int
    solution: dirichlet.DirichletSolution
    bias_bound: float

    def lookup(self, diff: np.ndarray) -> np.ndarray:
        diff = np.asarray(diff, dtype=np.int64).reshape(-1, self.d)
        out = self.solution.value_at(diff)
        outside = ~self.solution.inside(diff)
        if np.any(outside):
            norms = np.linalg.norm(diff[outside].astype(float), axis=1)
            out[outside] = dirichlet.green_constant(self.d) * norms ** (2 - self.d)
        return out

    def matrix(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """G[i, j] = g(P_i, Q_j)."""
        P = np.asarray(P, dtype=np.int64).reshape(-1, self.d)
        Q = np.asarray(Q, dtype=np.int64).reshape(-1, self.d)
        out = np.empty((len(P), len(Q)))
        rows = max(1, (1 << 20) // max(len(Q), 1))
        for lo in range(0, len(P), rows):
            block = P[lo:lo + rows]
            diff = (block[:, None, :] - Q[None, :, :]).reshape(-1, self.d)
            out[lo:lo + rows] = self.lookup(diff).reshape(len(block), len(Q))
        return out


@lru_cache(maxsize=8)
def green_table(d: int, radius: Optional[int] = None, tol: float = dirichlet.DEFAULT_TOLERANCE) -> GreenTable:
    d = validate_dimension(d)
    radius = radius or GREEN_TABLE_RADIUS.get(d, 4)
    solution = dirichlet.green_column(d, np.zeros(d, dtype=np.int64), radius, tol)
    logger.info(f"Green table d={d} r={radius}: g(0,0) = {solution.value_at(np.zeros(d))[0]:.6f}")
    return GreenTable(d, radius, solution, dirichlet.exit_bias_bound(d, radius + 1))


def phi_from_measures(eA: EquilibriumMeasure, eB: EquilibriumMeasure, table: GreenTable) -> Estimate:
    """sum_{x, y} eA(x) eB(y) g(x, y) for given measures."""
    G = table.matrix(eA.points, eB.points)
    Gb = G @ eB.weights
    Ga = G.T @ eA.weights
    value = float(eA.weights @ Gb)
    stderr = math.sqrt(float(np.sum((Gb * eA.stderr) ** 2) + np.sum((Ga * eB.stderr) ** 2)))
    bias = table.bias_bound * float(eA.weights.sum() * eB.weights.sum())
    return Estimate(value, stderr, bias, eA.n_samples)


def phi_rho(A: PointSet, B: PointSet, rho: LengthDistribution, cfg: Optional[PotentialConfig] = None,
            stream: Optional[RngStream] = None) -> Estimate:
    """
    phi^(rho)(A, B) = sum_{x in A, y in B} e_A^(rho)(x) e_B^(rho)(y) g(x, y).

    Green's function values come from the cached table for the dimension.
    """
    cfg = _cfg(cfg)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("phi needs nonempty sets")
    eA = rho_equilibrium(A, rho, None, cfg, stream.child('A'))
    eB = eA if A == B else rho_equilibrium(B, rho, None, cfg, stream.child('B'))
    return phi_from_measures(eA, eB, green_table(A.d, cfg.green_table_radius, cfg.tolerance))


@dataclass
class EpsilonEstimate:
    """Sample statistics of cap(X[0,T]) (1 + log T 1_{d=4}) / T over replicas."""
    d: int
    T: int
    values: List[float]
    mean: float
    variance: float
    stderr: float
    concentration: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'d': self.d, 'T': self.T, 'mean': self.mean, 'variance': self.variance,
                'stderr': self.stderr, 'replicas': len(self.values), **self.concentration}


def normalized_trace_capacity(d: int, T: int, cfg: PotentialConfig, stream: RngStream) -> float:
    """One replica: cap(X[0,T]) (1 + log T 1_{d=4}) / T with cutoff s from cfg."""
    walk = sample_srw((0,) * d, T, stream.child('walk'))
    cap = truncated_capacity(walk.range_set(), cfg.escape_cutoff_steps, cfg, stream.child('capacity'))
    return cap.value * (1.0 + (math.log(T) if d == 4 else 0.0)) / T


def estimate_epsilon(d: int, T: int, replicas: int, cfg: Optional[PotentialConfig] = None,
                     stream: Optional[RngStream] = None, pool: Optional[WorkerPool] = None) -> EpsilonEstimate:
    """
    Estimate epsilon_d from independent walk traces.

    Args:
        d: Dimension
        T: Walk length (>= 1000)
        replicas: Number of independent walks
        cfg: Potential config; defaults to one escape walk per subsampled
            trace point with cutoff s = T
        stream: Root stream for the replicas
        pool: Worker pool for the replicas

    Returns:
        EpsilonEstimate with mean, variance and concentration statistics
    """
    d = validate_dimension(d)
    if T < MIN_EPSILON_LENGTH:
        raise ValueError(f"epsilon estimation needs T >= {MIN_EPSILON_LENGTH}, got {T}")
    if replicas < 2:
        raise ValueError(f"need at least 2 replicas, got {replicas}")
    cfg = cfg or PotentialConfig(mc_walks=1, escape_cutoff_steps=T)
    pool = pool or WorkerPool(1)
    values = pool.map(partial(normalized_trace_capacity, d, T, cfg),
                      [stream.child('replica', i) for i in range(replicas)])
    arr = np.asarray(values)
    mean = float(arr.mean())
    variance = float(arr.var(ddof=1))
    deviations = np.abs(arr - mean) / mean if mean else np.zeros_like(arr)
    concentration = {
        'relative_spread': math.sqrt(variance) / mean if mean else float('nan'),
        'max_relative_deviation': float(deviations.max()),
        'fraction_within_10pct': float(np.mean(deviations <= 0.1)),
    }
    logger.info(f"epsilon_{d} at T={T}: {mean:.4f} ± {math.sqrt(variance / replicas):.4f} ({replicas} replicas)")
    return EpsilonEstimate(d, T, values, mean, variance, math.sqrt(variance / replicas), concentration)
