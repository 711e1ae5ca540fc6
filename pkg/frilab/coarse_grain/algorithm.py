"""
The coarse-grained exploration algorithm.

Coarse vertices x (lattice positions R x) move through the states
unexplored -> active -> surviving / ruined. A round at an active vertex
grows alpha layers of typical trajectories from its seed; the round
succeeds when the layers form a good sequence and the last layer contains
a seed at every coarse neighbor. Success activates the neighbors, failure
ruins every coarse vertex within distance 2 gamma. The record of rounds is
enough to replay every status change.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from ..errors import BudgetExhaustedError, FrilabError, InvariantViolation
from ..fri.cloud import TrajectoryCloud, occupied_graph
from ..fri.sampler import sample_hitting
from ..laws.length_law import LengthDistribution
from ..lattice.points import Point, PointSet, origin, union_all
from ..lattice.rng import RngStream
from ..models.params import AlgorithmParams, PotentialConfig, TypicalityParams
from ..percolation.clusters import build_clusters
from .context import CoarseContext
from .proper import proper_parts, star_proper_part
from .scales import coarse_ball, coarse_neighbors, coarse_order, coarse_window, in_window
from .seeds import Seed, check_good_sequence, find_seed
from .typical import is_typical, restrict_typical

logger = logging.getLogger(__name__)


class Status(str, Enum):
    UNEXPLORED = 'unexplored'
    ACTIVE = 'active'
    SURVIVING = 'surviving'
    RUINED = 'ruined'


TRANSITIONS = {
    (Status.UNEXPLORED, Status.ACTIVE),
    (Status.ACTIVE, Status.SURVIVING),
    (Status.ACTIVE, Status.RUINED),
    (Status.UNEXPLORED, Status.RUINED),
    (Status.SURVIVING, Status.RUINED),
}

NO_SEED = 'no-seed'
EXTINCT = 'extinct'
WINDOW_EXHAUSTED = 'window-exhausted'


@dataclass
class RoundRecord:
    """aleph_m: the explored position and its fail bit, or the terminal symbol (position None)."""
    m: int
    position: Optional[Point] = None
    fail: Optional[int] = None
    layer_sizes: List[int] = field(default_factory=list)
    good: Optional[bool] = None
    seeds_found: Optional[int] = None
    violation: Optional[Dict[str, Any]] = None

    @property
    def terminal(self) -> bool:
        return self.position is None

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record['position'] = list(self.position) if self.position is not None else None
        return record

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RoundRecord":
        position = data.get('position')
        return cls(m=int(data['m']), position=tuple(position) if position is not None else None,
                   fail=data.get('fail'), layer_sizes=list(data.get('layer_sizes', [])),
                   good=data.get('good'), seeds_found=data.get('seeds_found'), violation=data.get('violation'))


class AlgorithmState:
    """Status map on a finite coarse window plus everything explored so far."""

    def __init__(self, d: int, window_radius: int, ruin_radius: int):
        if window_radius < 1:
            raise ValueError(f"coarse window radius must be >= 1, got {window_radius}")
        self.d = d
        self.window_radius = window_radius
        self.ruin_radius = ruin_radius
        self.status: Dict[Point, Status] = {x: Status.UNEXPLORED for x in coarse_window(d, window_radius)}
        self.record: List[RoundRecord] = []
        self.seeds: Dict[Point, Seed] = {}
        self.layers: Dict[Point, List[TrajectoryCloud]] = {}
        self.origin_layer = TrajectoryCloud.empty(d)
        self.explored = TrajectoryCloud.empty(d)
        self.J = PointSet.empty(d)
        self.outcome: Optional[str] = None

    def __repr__(self) -> str:
        counts = {s.value: n for s, n in self.counts().items()}
        return f"AlgorithmState(d={self.d}, window={self.window_radius}, {counts}, outcome={self.outcome})"

    def set_status(self, x: Point, new: Status) -> None:
        old = self.status[x]
        if old == new:
            return
        if (old, new) not in TRANSITIONS:
            raise InvariantViolation(f"illegal status change at {x}: {old.value} -> {new.value}")
        self.status[x] = new

    def ruin(self, x: Point) -> List[Point]:
        """Ruin every window vertex within coarse distance 2 gamma of x."""
        ruined = []
        for y in coarse_ball(x, self.ruin_radius):
            if y in self.status and self.status[y] != Status.RUINED:
                self.set_status(y, Status.RUINED)
                ruined.append(y)
        return ruined

    def activate_neighbors(self, x: Point) -> List[Point]:
        """Neighbors of x that become active; out-of-window neighbors are skipped."""
        activated = []
        for y in coarse_neighbors(x):
            if y in self.status and self.status[y] == Status.UNEXPLORED:
                self.set_status(y, Status.ACTIVE)
                activated.append(y)
        return activated

    def next_active(self) -> Optional[Point]:
        active = [x for x, s in self.status.items() if s == Status.ACTIVE]
        return min(active, key=coarse_order) if active else None

    def counts(self) -> Dict[Status, int]:
        out = {s: 0 for s in Status}
        for s in self.status.values():
            out[s] += 1
        return out

    def survival_set(self) -> List[Point]:
        """V_a: the surviving coarse vertices in canonical order."""
        return sorted((x for x, s in self.status.items() if s == Status.SURVIVING), key=coarse_order)

    def failures(self) -> int:
        return sum(1 for r in self.record if r.fail == 1)

    def status_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for x in sorted(self.status, key=coarse_order):
            row = {f'x{i + 1}': c for i, c in enumerate(x)}
            row['status'] = self.status[x].value
            rows.append(row)
        return rows

    def summary(self) -> Dict[str, Any]:
        return {
            'outcome': self.outcome,
            'rounds': sum(1 for r in self.record if not r.terminal),
            'failures': self.failures(),
            'surviving': len(self.survival_set()),
            'ruined': self.counts()[Status.RUINED],
            'explored_trajectories': len(self.explored),
        }


def replay_record(record: Sequence[Union[RoundRecord, Dict[str, Any]]], d: int, window_radius: int,
                  ruin_radius: int) -> Dict[Point, Status]:
    """
    Recompute the final status map from a round record.

    Args:
        record: Round records (objects or their dictionaries)
        d: Dimension
        window_radius: Coarse window radius of the run
        ruin_radius: Coarse ruin radius floor(2 gamma)

    Returns:
        Status per window vertex
    """
    state = AlgorithmState(d, window_radius, ruin_radius)
    rounds = [r if isinstance(r, RoundRecord) else RoundRecord.from_dict(r) for r in record]
    if not rounds or rounds[0].terminal:
        return state.status
    state.set_status(origin(d), Status.ACTIVE)
    for r in rounds:
        if r.terminal:
            break
        if r.fail:
            state.ruin(r.position)
        else:
            state.set_status(r.position, Status.SURVIVING)
            state.activate_neighbors(r.position)
    return state.status


def verify_replay(state: AlgorithmState) -> bool:
    return replay_record(state.record, state.d, state.window_radius, state.ruin_radius) == state.status


class _Run:
    """One execution of the algorithm; sequential by construction."""

    def __init__(self, u: float, ctx: CoarseContext, window_radius: int, stream: RngStream):
        self.u = u
        self.ctx = ctx
        self.params = ctx.algorithm
        self.stream = stream
        self.state = AlgorithmState(ctx.d, window_radius, ctx.scales.ruin_radius)

    def xbar(self, A: PointSet, B: PointSet, D: PointSet, stream: RngStream) -> TrajectoryCloud:
        """Typical trajectories hitting A, avoiding B, entering A first in D."""
        if self.u == 0 or len(A) == 0 or len(D) == 0:
            return TrajectoryCloud.empty(self.ctx.d)
        fresh = sample_hitting(self.u, self.ctx.rho, A, stream, band=self.ctx.scales.band)
        fresh.require_complete("algorithm layer")
        return restrict_typical(fresh.restrict_hitting(A, D, B), self.ctx)

    def store(self, layer: TrajectoryCloud) -> None:
        state = self.state
        state.explored = state.explored.union(layer)
        if len(state.explored) > self.params.population_cap:
            raise BudgetExhaustedError(f"explored more than {self.params.population_cap} trajectories")

    def check(self) -> None:
        if not self.params.check_invariants or len(self.state.explored) == 0:
            return
        clusters = build_clusters(occupied_graph(self.state.explored))
        if clusters.n_clusters != 1:
            raise InvariantViolation(f"G(J) has {clusters.n_clusters} components after {len(self.state.record)} rounds")

    def start(self) -> Optional[Seed]:
        ctx, state = self.ctx, self.state
        z = PointSet.from_points([ctx.scales.z], ctx.d)
        layer = self.xbar(z, PointSet.empty(ctx.d), z, self.stream.child('origin'))
        state.origin_layer = layer
        self.store(layer)
        parts = proper_parts(layer, z, None, ctx)
        seed = find_seed(layer, origin(ctx.d), self.params.beta, ctx, parts)
        logger.info(f"Origin layer: {len(layer)} trajectories, seed {'found' if seed else 'absent'}")
        return seed

    def history(self) -> List[TrajectoryCloud]:
        levels = [self.state.origin_layer]
        for r in self.state.record:
            if r.position is not None and r.position in self.state.layers:
                levels.extend(self.state.layers[r.position])
        return levels

    def round(self, m: int, x: Point) -> RoundRecord:
        ctx, state, params = self.ctx, self.state, self.params
        seed = state.seeds[x]
        history = self.history() + [seed.cloud]
        layers: List[TrajectoryCloud] = []
        previous = seed.cloud
        for i in range(1, params.alpha + 1):
            A = previous.vertices()
            D = union_all([star_proper_part(traj, ctx) for traj in previous], ctx.d)
            layer = self.xbar(A, state.J, D, self.stream.child('round', m, 'layer', i))
            state.J = state.J.union(A)
            layers.append(layer)
            self.store(layer)
            previous = layer
        state.layers[x] = layers
        verdict = check_good_sequence(layers, history, ctx, anchor_parts=seed.parts)
        found: Dict[Point, Seed] = {}
        if verdict.good:
            last, parts = layers[-1], verdict.parts[-1]
            for y in coarse_neighbors(x):
                seed_y = find_seed(last, y, params.beta, ctx, parts)
                if seed_y is None:
                    break
                found[y] = seed_y
        success = verdict.good and len(found) == 2 * ctx.d
        record = RoundRecord(m, x, 0 if success else 1, [len(layer) for layer in layers], verdict.good,
                             len(found), verdict.violation)
        if success:
            state.set_status(x, Status.SURVIVING)
            for y in state.activate_neighbors(x):
                state.seeds[y] = found[y]
            if any(not in_window(y, state.window_radius) for y in coarse_neighbors(x)):
                state.outcome = WINDOW_EXHAUSTED
        else:
            state.ruin(x)
        logger.info(f"Round {m} at {x}: {'surviving' if success else 'ruined'} "
                    f"(layers {record.layer_sizes}, good={verdict.good}, seeds {len(found)}/{2 * ctx.d})")
        return record

    def execute(self) -> AlgorithmState:
        state = self.state
        seed = self.start()
        if seed is None:
            state.record.append(RoundRecord(0))
            state.outcome = NO_SEED
            return state
        x0 = origin(self.ctx.d)
        state.set_status(x0, Status.ACTIVE)
        state.seeds[x0] = seed
        self.check()
        m = 0
        x = x0
        while x is not None:
            state.record.append(self.round(m, x))
            self.check()
            m += 1
            if state.outcome == WINDOW_EXHAUSTED:
                return state
            x = state.next_active()
        state.record.append(RoundRecord(m))
        state.outcome = EXTINCT
        return state


def run_algorithm(u: float, rho: LengthDistribution, d: int, window_radius: int, stream: RngStream,
                  params: Optional[AlgorithmParams] = None, typicality: Optional[TypicalityParams] = None,
                  cfg: Optional[PotentialConfig] = None, epsilon_d: Optional[float] = None) -> AlgorithmState:
    """
    Run the exploration algorithm on the coarse window B(0, window_radius).

    Args:
        u: Intensity
        rho: Length law (mu_1 >= 4)
        d: Dimension
        window_radius: Coarse window radius
        stream: Random stream; the origin layer, every round layer and the
            potential estimates use disjoint children
        params: Round parameters (alpha, beta, k1, caps)
        typicality: Typicality constants and scale overrides
        cfg: Potential estimator settings
        epsilon_d: Capacity constant for d >= 5

    Returns:
        Final AlgorithmState; `record` holds aleph_m and `survival_set()` V_a

    Raises:
        BudgetExhaustedError: a sampler or the population cap ran out; the
            partial record is attached
    """
    if u < 0:
        raise ValueError(f"intensity must be nonnegative, got {u}")
    params = params or AlgorithmParams(u=u)
    ctx = CoarseContext(rho, d, typicality, stream.child('potential'), cfg, params, epsilon_d)
    run = _Run(u, ctx, window_radius, stream.child('layers'))
    try:
        state = run.execute()
    except FrilabError as e:
        logger.error(f"Algorithm aborted after {len(run.state.record)} rounds: {e.message}")
        if e.partial is None:
            e.partial = {'record': [r.to_dict() for r in run.state.record],
                         'status': [row for row in run.state.status_rows() if row['status'] != 'unexplored']}
        raise
    if params.check_invariants:
        for traj in state.explored:
            if not is_typical(traj, ctx):
                raise InvariantViolation("an explored trajectory is not typical")
        if not verify_replay(state):
            raise InvariantViolation("the round record does not replay to the final status map")
    logger.info(f"Algorithm finished ({state.outcome}): {state.summary()}")
    return state


def failure_frequency(records: Iterable[Sequence[RoundRecord]]) -> float:
    """Fraction of rounds with fail bit 1 over the round records of several runs."""
    rounds = fails = 0
    for record in records:
        for r in record:
            if not r.terminal:
                rounds += 1
                fails += int(r.fail == 1)
    return fails / rounds if rounds else 0.0
