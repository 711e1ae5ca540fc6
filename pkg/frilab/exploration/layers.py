"""
Layer-by-layer exploration of the origin's cluster.

Layer k+1 consists of the trajectories that meet the vertex layer L_k and
avoid all earlier vertex layers. The dominating process instead draws each
layer from a fresh independent cloud hitting the previous layer, with no
exclusions; `explore_coupled` builds both from the same fresh clouds so the
exploration layers sit inside the dominating ones.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import InvariantViolation, MemoryCapError
from ..fri.cloud import TrajectoryCloud
from ..fri.sampler import sample_hitting
from ..laws.length_law import LengthDistribution
from ..lattice.points import PointSet, origin, union_all
from ..lattice.rng import RngStream
from ..models.params import PotentialConfig
from ..potential.estimators import Estimate, kappa_rho
from ..workers import WorkerPool

logger = logging.getLogger(__name__)

DEFAULT_MAX_LAYERS = 32
MEMORY_CAP_POINTS = 10 ** 8


@dataclass
class LayerRecord:
    """Trajectory layers (layers[0] empty) and vertex layers (vertex_layers[0] = {0})."""
    d: int
    layers: List[TrajectoryCloud] = field(default_factory=list)
    vertex_layers: List[PointSet] = field(default_factory=list)
    truncated: bool = False

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def extinct(self) -> bool:
        return bool(self.layers) and len(self.layers[-1]) == 0 and len(self.layers) > 1

    def union(self) -> TrajectoryCloud:
        """All explored trajectories."""
        total = TrajectoryCloud.empty(self.d)
        for layer in self.layers:
            total = total.union(layer)
        return total

    def explored_vertices(self) -> PointSet:
        return union_all(self.vertex_layers, self.d)

    def sizes(self) -> List[Tuple[int, int]]:
        """(|layer_k|, |L_k|) per k."""
        return [(len(c), len(v)) for c, v in zip(self.layers, self.vertex_layers)]


def _start(d: int) -> LayerRecord:
    return LayerRecord(d, [TrajectoryCloud.empty(d)], [PointSet.from_points([origin(d)], d)])


def _check_intensity(u: float, max_layers: int) -> None:
    if u < 0:
        raise ValueError(f"intensity must be nonnegative, got {u}")
    if max_layers < 1:
        raise ValueError(f"max_layers must be >= 1, got {max_layers}")


def _append(record: LayerRecord, layer: TrajectoryCloud, total_points: int) -> int:
    layer.require_complete(f"layer {record.n_layers}")
    vertices = layer.vertices()
    total_points += len(vertices)
    if total_points > MEMORY_CAP_POINTS:
        logger.error(f"Exploration stopped at layer {record.n_layers}: {total_points} stored points")
        raise MemoryCapError(f"exploration exceeded {MEMORY_CAP_POINTS} stored points",
                             partial={'layer_sizes': record.sizes()})
    record.layers.append(layer)
    record.vertex_layers.append(vertices)
    return total_points


def _check_disjoint(layer: TrajectoryCloud, earlier: PointSet, k: int) -> None:
    if len(earlier) and np.any(layer.hit_mask(earlier)):
        raise InvariantViolation(f"layer {k} contains a trajectory meeting an earlier vertex layer")


def explore_layers(u: float, rho: LengthDistribution, d: int, stream: Optional[RngStream] = None,
                   max_layers: int = DEFAULT_MAX_LAYERS,
                   cloud: Optional[TrajectoryCloud] = None) -> LayerRecord:
    """
    Explore the cluster of the origin layer by layer.

    Args:
        u: Intensity
        rho: Length law
        d: Dimension
        stream: Random stream; layer k is sampled from child ('layer', k)
        max_layers: Number of layers after which the record is marked truncated
        cloud: Explore a fixed cloud instead of sampling (no randomness used)

    Returns:
        LayerRecord; the union of its layers is the set of trajectories
        in the origin's cluster
    """
    _check_intensity(u, max_layers)
    record = _start(d)
    earlier = PointSet.empty(d)
    total_points = 1
    for k in range(max_layers):
        current = record.vertex_layers[k]
        if cloud is not None:
            layer = cloud.restrict(current, earlier)
        elif u == 0:
            layer = TrajectoryCloud.empty(d)
        else:
            fresh = sample_hitting(u, rho, current, stream.child('layer', k + 1))
            layer = fresh.restrict(current, earlier)
        _check_disjoint(layer, earlier, k + 1)
        total_points = _append(record, layer, total_points)
        if len(layer) == 0:
            break
        earlier = earlier.union(current)
    else:
        record.truncated = True
        logger.warning(f"Exploration truncated after {max_layers} layers")
    logger.debug(f"Exploration u={u:.4g}: layer sizes {record.sizes()}")
    return record


def explore_dominating(u: float, rho: LengthDistribution, d: int, stream: RngStream,
                       max_layers: int = DEFAULT_MAX_LAYERS) -> LayerRecord:
    """Primed process: layer k+1 is everything in a fresh cloud that hits L'_k."""
    return explore_coupled(u, rho, d, stream, max_layers)[1]


def explore_coupled(u: float, rho: LengthDistribution, d: int, stream: RngStream,
                    max_layers: int = DEFAULT_MAX_LAYERS) -> Tuple[LayerRecord, LayerRecord]:
    """
    Exploration and dominating process from shared fresh clouds.

    The fresh cloud J_{k+1} is sampled on L'_k; the primed layer is all of
    it and the exploration layer is J_{k+1}[L_k; L_0 u ... u L_{k-1}], which
    is a sub-multiset because L_k is contained in L'_k.

    Returns:
        (exploration record, dominating record)
    """
    _check_intensity(u, max_layers)
    plain, primed = _start(d), _start(d)
    earlier = PointSet.empty(d)
    plain_points = primed_points = 1
    for k in range(max_layers):
        current, current_primed = plain.vertex_layers[k], primed.vertex_layers[k]
        if u == 0:
            fresh = TrajectoryCloud.empty(d)
        else:
            fresh = sample_hitting(u, rho, current_primed, stream.child('layer', k + 1))
        layer = fresh.restrict(current, earlier) if len(current) else TrajectoryCloud.empty(d)
        if not layer.issubmultiset(fresh):
            raise InvariantViolation(f"coupled layer {k + 1} is not contained in the dominating layer")
        _check_disjoint(layer, earlier, k + 1)
        plain_points = _append(plain, layer, plain_points)
        primed_points = _append(primed, fresh, primed_points)
        if len(fresh) == 0:
            break
        earlier = earlier.union(current)
    else:
        plain.truncated = primed.truncated = True
        logger.warning(f"Coupled exploration truncated after {max_layers} layers")
    return plain, primed


def layer_kappas(record: LayerRecord, rho: LengthDistribution, stream: RngStream,
                 cfg: Optional[PotentialConfig] = None) -> List[Estimate]:
    """kappa^(rho)(L_k) for every vertex layer (0 for empty layers)."""
    out = []
    for k, vertices in enumerate(record.vertex_layers):
        if len(vertices) == 0:
            out.append(Estimate(0.0))
        else:
            out.append(kappa_rho(vertices, rho, cfg, stream.child('kappa', k)))
    return out


@dataclass
class RecursionTrace:
    """Per-layer Monte Carlo estimates of W_k = E[kappa(L'_k)] and V_k."""
    W: List[float]
    W_stderr: List[float]
    V: List[float]
    V_stderr: List[float]
    replicas: int

    def ratios(self) -> Dict[str, List[float]]:
        """W_{k+1}/W_k and V_{k+1}/W_k (nan where W_k = 0)."""
        w_ratio = [self.W[k + 1] / self.W[k] if self.W[k] > 0 else math.nan for k in range(len(self.W) - 1)]
        v_ratio = [self.V[k + 1] / self.W[k] if self.W[k] > 0 else math.nan for k in range(len(self.W) - 1)]
        return {'W_ratio': w_ratio, 'V_ratio': v_ratio}

    def rows(self) -> List[Dict[str, Any]]:
        ratios = self.ratios()
        rows = []
        for k in range(len(self.W)):
            rows.append({'k': k, 'W': self.W[k], 'W_stderr': self.W_stderr[k], 'V': self.V[k],
                         'V_stderr': self.V_stderr[k],
                         'W_ratio': ratios['W_ratio'][k] if k < len(self.W) - 1 else math.nan,
                         'V_ratio': ratios['V_ratio'][k] if k < len(self.W) - 1 else math.nan})
        return rows


def recursion_replica(u: float, rho: LengthDistribution, d: int, max_layers: int,
                      cfg: Optional[PotentialConfig], stream: RngStream) -> Tuple[List[float], List[int]]:
    """kappa(L'_k) for k >= 1 and |L'_k| for k >= 0 from one dominating run."""
    record = explore_dominating(u, rho, d, stream.child('explore'), max_layers)
    kappas, sizes = [], []
    for k in range(max_layers + 1):
        vertices = record.vertex_layers[k] if k < record.n_layers else PointSet.empty(d)
        sizes.append(len(vertices))
        if k == 0:
            continue
        kappas.append(kappa_rho(vertices, rho, cfg, stream.child('kappa', k)).value if len(vertices) else 0.0)
    return kappas, sizes


def track_recursion(u: float, rho: LengthDistribution, d: int, replicas: int, stream: RngStream,
                    max_layers: int = 8, cfg: Optional[PotentialConfig] = None,
                    pool: Optional[WorkerPool] = None) -> RecursionTrace:
    """
    Estimate W_k and V_k over independent dominating runs.

    V_k = E|L'_k|, divided by log mu_1 in d = 4. W_0 = kappa({0}) is
    computed once.
    """
    if replicas < 2:
        raise ValueError(f"need at least 2 replicas, got {replicas}")
    pool = pool or WorkerPool(1)
    results = pool.map(partial(recursion_replica, u, rho, d, max_layers, cfg),
                       [stream.child('replica', i) for i in range(replicas)])
    kappa = np.array([r[0] for r in results], dtype=float)
    sizes = np.array([r[1] for r in results], dtype=float)
    if d == 4:
        if rho.mu1 <= 1:
            raise ValueError("the d = 4 normalization needs mu_1 > 1")
        sizes = sizes / math.log(rho.mu1)
    w0 = kappa_rho(PointSet.from_points([origin(d)], d), rho, cfg, stream.child('kappa0'))
    W = [w0.value] + kappa.mean(axis=0).tolist()
    W_se = [w0.stderr] + (kappa.std(axis=0, ddof=1) / math.sqrt(replicas)).tolist()
    V = sizes.mean(axis=0).tolist()
    V_se = (sizes.std(axis=0, ddof=1) / math.sqrt(replicas)).tolist()
    logger.info(f"Recursion trace u={u:.4g}: W = {[round(w, 4) for w in W[:5]]}...")
    return RecursionTrace(W, W_se, V, V_se, replicas)
