"""
Connected components of occupied graphs.
"""

import logging
from typing import Dict, Hashable, Iterable, List, Optional

import numpy as np

from ..fri.cloud import OccupiedGraph
from ..lattice.points import Box, PointLike, PointSet, pack, unpack

logger = logging.getLogger(__name__)


class UnionFind:
    """
    Union by rank with path compression over hashable items.

    Clusters can be marked; marks survive unions, which lets callers ask
    "does the cluster of x contain a marked vertex" in constant time.
    """

    def __init__(self, items: Iterable[Hashable] = ()):
        self._leader: Dict[Hashable, Hashable] = {}
        self._size: Dict[Hashable, int] = {}
        self._rank: Dict[Hashable, int] = {}
        self._marked: Dict[Hashable, bool] = {}
        self.n_clusters = 0
        for item in items:
            self.add(item)

    def __repr__(self) -> str:
        return f"UnionFind({len(self._leader)} items, {self.n_clusters} clusters)"

    def __contains__(self, item: Hashable) -> bool:
        return item in self._leader

    def __len__(self) -> int:
        return len(self._leader)

    def add(self, item: Hashable) -> None:
        if item not in self._leader:
            self._leader[item] = item
            self._size[item] = 1
            self._rank[item] = 0
            self._marked[item] = False
            self.n_clusters += 1

    def find(self, item: Hashable) -> Hashable:
        path = [item]
        parent = self._leader[item]
        while parent != self._leader[parent]:
            path.append(parent)
            parent = self._leader[parent]
        for node in path:
            self._leader[node] = parent
        return parent

    def union(self, a: Hashable, b: Hashable) -> Hashable:
        """Merge the clusters of a and b (adding either if new); returns the new leader."""
        self.add(a)
        self.add(b)
        s1, s2 = self.find(a), self.find(b)
        if s1 == s2:
            return s1
        if self._rank[s2] > self._rank[s1]:
            s1, s2 = s2, s1
        if self._rank[s1] == self._rank[s2]:
            self._rank[s1] += 1
        self._leader[s2] = s1
        self._size[s1] += self._size[s2]
        self._marked[s1] = self._marked[s1] or self._marked[s2]
        self.n_clusters -= 1
        return s1

    def size(self, item: Hashable) -> int:
        return self._size[self.find(item)]

    def connected(self, a: Hashable, b: Hashable) -> bool:
        return self.find(a) == self.find(b)

    def mark(self, item: Hashable) -> None:
        self.add(item)
        self._marked[self.find(item)] = True

    def is_marked(self, item: Hashable) -> bool:
        return self._marked[self.find(item)]

    def items(self) -> List[Hashable]:
        return list(self._leader)


class ClusterIndex:
    """
    Components of an occupied graph, keyed by packed vertex keys.

    Roots are canonical: the smallest key of each component.
    """

    def __init__(self, d: int, uf: UnionFind):
        self.d = d
        keys = np.array(sorted(uf.items()), dtype=np.int64)
        leaders = np.array([uf.find(int(k)) for k in keys], dtype=np.int64)
        # canonical root: smallest key per component
        order = np.lexsort((keys, leaders))
        first = np.ones(len(order), dtype=bool)
        first[1:] = leaders[order][1:] != leaders[order][:-1]
        group = np.cumsum(first) - 1
        canonical = keys[order][first][group]
        self.keys = keys
        self.roots = np.empty_like(keys)
        self.roots[order] = canonical
        self._root_of = dict(zip(self.keys.tolist(), self.roots.tolist()))
        uniq, counts = np.unique(self.roots, return_counts=True)
        self._sizes = dict(zip(uniq.tolist(), counts.tolist()))

    def __len__(self) -> int:
        return int(len(self.keys))

    @property
    def n_clusters(self) -> int:
        return len(self._sizes)

    def _key(self, x: PointLike) -> int:
        return int(pack(np.asarray(x, dtype=np.int64).reshape(1, self.d), self.d)[0])

    def find(self, x: PointLike) -> Optional[tuple]:
        """Root point of x's component, or None if x is not a vertex."""
        root = self._root_of.get(self._key(x))
        return None if root is None else tuple(int(c) for c in unpack(np.array([root]), self.d)[0])

    def connected(self, x: PointLike, y: PointLike) -> bool:
        rx, ry = self._root_of.get(self._key(x)), self._root_of.get(self._key(y))
        return rx is not None and rx == ry

    def cluster_of(self, x: PointLike) -> PointSet:
        root = self._root_of.get(self._key(x))
        if root is None:
            return PointSet.empty(self.d)
        return PointSet(self.d, self.keys[self.roots == root], assume_unique=True)

    def component_sizes(self) -> List[int]:
        """Sizes in decreasing order."""
        return sorted(self._sizes.values(), reverse=True)

    def size_of(self, x: PointLike) -> int:
        root = self._root_of.get(self._key(x))
        return 0 if root is None else self._sizes[root]

    def largest(self) -> PointSet:
        if not self._sizes:
            return PointSet.empty(self.d)
        root = min(self._sizes, key=lambda r: (-self._sizes[r], r))
        return PointSet(self.d, self.keys[self.roots == root], assume_unique=True)

    def touches_boundary(self, x: PointLike, box: Box) -> bool:
        """Does the component of x contain a point on the faces of `box`?"""
        cluster = self.cluster_of(x)
        return bool(len(cluster) and np.any(box.on_boundary_array(cluster.to_array())))


def build_clusters(graph: OccupiedGraph, extra_vertices: Optional[Iterable[PointLike]] = None) -> ClusterIndex:
    """
    Connected components of the open-edge graph.

    Args:
        graph: Occupied graph
        extra_vertices: Points added as vertices even if unvisited (e.g. the origin)

    Returns:
        ClusterIndex over V(graph) plus the extra vertices
    """
    uf = UnionFind(graph.vertices.keys.tolist())
    if extra_vertices is not None:
        points = np.asarray(list(extra_vertices), dtype=np.int64).reshape(-1, graph.d)
        for key in pack(points, graph.d).tolist():
            uf.add(key)
    for a, b in graph.edges.tolist():
        uf.union(a, b)
    logger.debug(f"Clusters: {len(uf)} vertices, {graph.n_edges} edges, {uf.n_clusters} components")
    return ClusterIndex(graph.d, uf)
