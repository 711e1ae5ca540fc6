"""
Trajectory clouds (finite point measures on trajectories) and their
occupied-edge graphs.

A cloud is a multiset: the same trajectory may appear several times, and
each copy carries its own provenance record (origin vertex, rerooted split,
hit point, arrival level).
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..errors import BudgetExhaustedError, SamplerDiagnostic
from ..lattice.codec import read_ndjson, write_ndjson
from ..lattice.points import Box, PointLike, PointSet, pack, unpack
from ..lattice.trajectory import Trajectory

logger = logging.getLogger(__name__)

Provenance = Dict[str, Any]


@dataclass
class CloudEntry:
    trajectory: Trajectory
    provenance: Provenance = field(default_factory=dict)


class TrajectoryCloud:
    """
    A finite multiset of trajectories in Z^d.

    Restriction operators:
        restrict(A, B)            X[A; B] = X[A] - X[B]
        restrict_hitting(A, D, B) the part of X[A; B] whose first entry into A lies in D
    """

    def __init__(self, d: int, entries: Iterable[CloudEntry] = (),
                 diagnostics: Optional[List[SamplerDiagnostic]] = None):
        self.d = d
        self.entries: List[CloudEntry] = list(entries)
        self.diagnostics: List[SamplerDiagnostic] = list(diagnostics or [])
        self._concat: Optional[Tuple[np.ndarray, np.ndarray]] = None
        for entry in self.entries:
            if entry.trajectory.d != d:
                raise ValueError(f"trajectory of dimension {entry.trajectory.d} in a d={d} cloud")

    @classmethod
    def empty(cls, d: int) -> "TrajectoryCloud":
        return cls(d)

    @classmethod
    def from_trajectories(cls, d: int, trajectories: Iterable[Trajectory],
                          provenance: Optional[Iterable[Provenance]] = None) -> "TrajectoryCloud":
        trajectories = list(trajectories)
        tags = list(provenance) if provenance is not None else [{} for _ in trajectories]
        return cls(d, [CloudEntry(t, p) for t, p in zip(trajectories, tags)])

    def __len__(self) -> int:
        """|S|, counting multiplicity."""
        return len(self.entries)

    def __iter__(self) -> Iterator[Trajectory]:
        return (entry.trajectory for entry in self.entries)

    def __repr__(self) -> str:
        flag = ", flagged" if self.flagged else ""
        return f"TrajectoryCloud(d={self.d}, size={len(self)}{flag})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrajectoryCloud):
            return NotImplemented
        return self.d == other.d and self.multiplicities() == other.multiplicities()

    @property
    def trajectories(self) -> List[Trajectory]:
        return [entry.trajectory for entry in self.entries]

    @property
    def flagged(self) -> bool:
        """True when some sampler could not complete the draw exactly."""
        return bool(self.diagnostics)

    def require_complete(self, context: str = "sample") -> "TrajectoryCloud":
        """Raise BudgetExhaustedError if the cloud carries diagnostics."""
        if self.flagged:
            logger.error(f"{context}: {len(self.diagnostics)} flagged draws")
            raise BudgetExhaustedError(f"{context} incomplete: rejection budget exhausted",
                                       diagnostics=self.diagnostics)
        return self

    def multiplicities(self) -> Counter:
        return Counter(self.trajectories)

    def multiplicity(self, trajectory: Trajectory) -> int:
        """n_eta(S)."""
        return sum(1 for t in self if t == trajectory)

    def distinct(self) -> List[Trajectory]:
        return sorted(self.multiplicities())

    def canonical(self) -> "TrajectoryCloud":
        """Same multiset, entries in canonical trajectory order."""
        order = sorted(range(len(self.entries)), key=lambda i: self.entries[i].trajectory.sort_key())
        return TrajectoryCloud(self.d, [self.entries[i] for i in order], self.diagnostics)

    def union(self, other: "TrajectoryCloud") -> "TrajectoryCloud":
        """Multiset sum (multiplicities add)."""
        self._check_dim(other)
        return TrajectoryCloud(self.d, self.entries + other.entries, self.diagnostics + other.diagnostics)

    __add__ = union

    def difference(self, other: "TrajectoryCloud") -> "TrajectoryCloud":
        """Multiset difference (multiplicities subtract, floored at 0)."""
        self._check_dim(other)
        remove = other.multiplicities()
        kept = []
        for entry in self.entries:
            if remove[entry.trajectory] > 0:
                remove[entry.trajectory] -= 1
            else:
                kept.append(entry)
        return TrajectoryCloud(self.d, kept, self.diagnostics)

    def issubmultiset(self, other: "TrajectoryCloud") -> bool:
        mine = self.multiplicities()
        theirs = other.multiplicities()
        return all(theirs[t] >= n for t, n in mine.items())

    def filter(self, mask: np.ndarray) -> "TrajectoryCloud":
        mask = np.asarray(mask, dtype=bool)
        return TrajectoryCloud(self.d, [e for e, keep in zip(self.entries, mask) if keep], self.diagnostics)

    def _check_dim(self, other: "TrajectoryCloud") -> None:
        if other.d != self.d:
            raise ValueError(f"dimension mismatch: {self.d} vs {other.d}")

    def _concatenated(self) -> Tuple[np.ndarray, np.ndarray]:
        """(all point keys back to back, start offset of each entry)."""
        if self._concat is None:
            lengths = np.array([e.trajectory.length + 1 for e in self.entries], dtype=np.int64)
            offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]) if len(lengths) else np.zeros(0, np.int64)
            keys = (np.concatenate([e.trajectory.point_keys() for e in self.entries])
                    if self.entries else np.zeros(0, dtype=np.int64))
            self._concat = (keys, offsets.astype(np.int64))
        return self._concat

    def hit_mask(self, A: PointSet) -> np.ndarray:
        """1{eta meets A} per entry."""
        if not self.entries:
            return np.zeros(0, dtype=bool)
        keys, offsets = self._concatenated()
        return np.logical_or.reduceat(A.contains_keys(keys), offsets)

    def first_entry(self, A: PointSet) -> Tuple[np.ndarray, np.ndarray]:
        """
        Hitting time of A per entry and the packed key of the entry point.

        Returns:
            (times, keys); -1 in both where the trajectory misses A
        """
        n = len(self.entries)
        times = np.full(n, -1, dtype=np.int64)
        keys_out = np.full(n, -1, dtype=np.int64)
        if n == 0:
            return times, keys_out
        keys, offsets = self._concatenated()
        inside = A.contains_keys(keys)
        hit = np.logical_or.reduceat(inside, offsets)
        positions = np.flatnonzero(inside)
        owner = np.searchsorted(offsets, positions, side='right') - 1
        first_pos = np.full(n, -1, dtype=np.int64)
        # positions are ascending, so the first occurrence per owner is the entry time
        uniq, first_idx = np.unique(owner, return_index=True)
        first_pos[uniq] = positions[first_idx]
        times[hit] = first_pos[hit] - offsets[hit]
        keys_out[hit] = keys[first_pos[hit]]
        return times, keys_out

    def restrict(self, A: PointSet, B: Optional[PointSet] = None) -> "TrajectoryCloud":
        """X[A; B]: trajectories meeting A but not B."""
        mask = self.hit_mask(A)
        if B is not None and len(B):
            mask &= ~self.hit_mask(B)
        return self.filter(mask)

    def restrict_hitting(self, A: PointSet, D: PointSet, B: Optional[PointSet] = None) -> "TrajectoryCloud":
        """X[A, D; B]: trajectories of X[A; B] whose first entry into A is in D."""
        if not D.issubset(A):
            raise ValueError("D must be a subset of A")
        _, entry_keys = self.first_entry(A)
        mask = (entry_keys >= 0) & D.contains_keys(entry_keys)
        if B is not None and len(B):
            mask &= ~self.hit_mask(B)
        return self.filter(mask)

    def vertices(self) -> PointSet:
        """V(omega): every point visited by some trajectory."""
        keys, _ = self._concatenated()
        return PointSet(self.d, keys)

    def local_time(self, x: PointLike) -> int:
        """Total number of visits to x summed over the cloud."""
        key = pack(np.asarray(x, dtype=np.int64).reshape(1, self.d), self.d)[0]
        keys, _ = self._concatenated()
        return int(np.count_nonzero(keys == key))

    def local_times(self, points: np.ndarray) -> np.ndarray:
        """Occupation times at many vertices at once."""
        keys, _ = self._concatenated()
        visited, counts = np.unique(keys, return_counts=True)
        query = pack(np.asarray(points, dtype=np.int64).reshape(-1, self.d), self.d)
        pos = np.clip(np.searchsorted(visited, query), 0, max(len(visited) - 1, 0))
        found = (visited[pos] == query) if len(visited) else np.zeros(len(query), dtype=bool)
        return np.where(found, counts[pos] if len(visited) else 0, 0).astype(np.int64)

    def count_by_entry_point(self, A: PointSet) -> Dict[Tuple[int, ...], int]:
        """Number of trajectories whose first entry into A is at each point of A."""
        _, keys = self.first_entry(A)
        counts = Counter(int(k) for k in keys if k >= 0)
        return {tuple(int(c) for c in unpack(np.array([k]), self.d)[0]): n for k, n in sorted(counts.items())}

    def dump_ndjson(self, path: Union[str, Path]) -> int:
        """One trajectory per line with provenance, canonical order."""
        canonical = self.canonical()
        return write_ndjson(path, ((e.trajectory, e.provenance) for e in canonical.entries))

    @classmethod
    def load_ndjson(cls, path: Union[str, Path], d: Optional[int] = None) -> "TrajectoryCloud":
        entries = [CloudEntry(traj, provenance or {}) for traj, provenance in read_ndjson(path)]
        if d is None:
            if not entries:
                raise ValueError(f"cannot infer the dimension of an empty cloud file: {path}")
            d = entries[0].trajectory.d
        return cls(d, entries)


@dataclass
class OccupiedGraph:
    """
    G(omega) clipped to a window: vertices V(omega) and the nearest-neighbor
    edges traversed by some trajectory, stored as sorted packed-key pairs.
    """
    d: int
    vertices: PointSet
    edges: np.ndarray
    window: Optional[Box] = None

    @property
    def n_edges(self) -> int:
        return int(len(self.edges))

    def has_edge(self, x: PointLike, y: PointLike) -> bool:
        kx, ky = pack(np.array([x, y], dtype=np.int64), self.d)
        lo, hi = min(kx, ky), max(kx, ky)
        return bool(np.any((self.edges[:, 0] == lo) & (self.edges[:, 1] == hi))) if self.n_edges else False

    def edge_points(self) -> np.ndarray:
        """(k, 2, d) array of edge endpoints."""
        if not self.n_edges:
            return np.zeros((0, 2, self.d), dtype=np.int64)
        return unpack(self.edges.ravel(), self.d).reshape(-1, 2, self.d)


def occupied_graph(cloud: TrajectoryCloud, window: Optional[Box] = None) -> OccupiedGraph:
    """
    Build G(omega), keeping only vertices and edges inside `window`.

    Args:
        cloud: Trajectory cloud
        window: Optional storage window; edges need both endpoints inside

    Returns:
        OccupiedGraph with set semantics on edges
    """
    d = cloud.d
    pairs = []
    for traj in cloud:
        keys = traj.point_keys()
        if traj.length:
            pairs.append(np.stack([np.minimum(keys[:-1], keys[1:]), np.maximum(keys[:-1], keys[1:])], axis=1))
    edges = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    vertices = cloud.vertices()
    if window is not None:
        if len(edges):
            ends = unpack(edges.ravel(), d).reshape(-1, 2, d)
            keep = window.contains_array(ends[:, 0]) & window.contains_array(ends[:, 1])
            edges = edges[keep]
        if len(vertices):
            vertices = vertices.subset(window.contains_array(vertices.to_array()))
    if len(edges):
        edges = np.unique(edges, axis=0)
    return OccupiedGraph(d, vertices, edges, window)
