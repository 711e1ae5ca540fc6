"""
Finite nearest-neighbor trajectories on Z^d.

A trajectory is stored as its start point plus one byte per step (a step
code in [0, 2d), see `unit_moves`). Positions and the range are
materialized on demand.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..config import debug_asserts_enabled
from .points import Point, PointLike, PointSet, as_point, pack, unit_moves, validate_dimension
from .rng import RngStream

StepCodes = Union[np.ndarray, Sequence[int], bytes]


class Trajectory:
    """An immutable path (eta(s))_{0 <= s <= T}."""

    __slots__ = ("start", "steps", "_points", "_keys")

    def __init__(self, start: PointLike, steps: StepCodes = ()):
        self.start: Point = as_point(start)
        d = validate_dimension(len(self.start))
        if isinstance(steps, (bytes, bytearray)):
            codes = np.frombuffer(bytes(steps), dtype=np.uint8).copy()
        else:
            codes = np.asarray(steps, dtype=np.int64)
            if codes.size and (codes.min() < 0 or codes.max() >= 2 * d):
                raise ValueError(f"step codes must lie in [0, {2 * d}) for d={d}")
            codes = codes.astype(np.uint8)
        if codes.size and codes.max() >= 2 * d:
            raise ValueError(f"step codes must lie in [0, {2 * d}) for d={d}")
        codes.setflags(write=False)
        self.steps = codes
        self._points: Optional[np.ndarray] = None
        self._keys: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return len(self.start)

    @property
    def length(self) -> int:
        """T(eta), the number of steps."""
        return int(self.steps.size)

    def __len__(self) -> int:
        return self.length

    def __repr__(self) -> str:
        return f"Trajectory(start={self.start}, T={self.length})"

    def key(self) -> Tuple[int, Point, bytes]:
        """Identity and canonical order: (length, start coords, step codes)."""
        return (self.length, self.start, self.steps.tobytes())

    sort_key = key

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.key() == other.key()

    def __lt__(self, other: "Trajectory") -> bool:
        return self.key() < other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def points(self) -> np.ndarray:
        """(T+1, d) array of positions."""
        if self._points is None:
            moves = unit_moves(self.d)
            pts = np.empty((self.length + 1, self.d), dtype=np.int64)
            pts[0] = self.start
            if self.length:
                np.cumsum(moves[self.steps], axis=0, out=pts[1:])
                pts[1:] += pts[0]
            pts.setflags(write=False)
            self._points = pts
        return self._points

    def point_keys(self) -> np.ndarray:
        """Packed keys of eta(0), ..., eta(T)."""
        if self._keys is None:
            keys = pack(self.points(), self.d)
            keys.setflags(write=False)
            self._keys = keys
        return self._keys

    def point(self, t: int) -> Point:
        if not 0 <= t <= self.length:
            raise ValueError(f"time {t} outside [0, {self.length}]")
        return tuple(int(c) for c in self.points()[t])

    def end(self) -> Point:
        return self.point(self.length)

    def range_set(self) -> PointSet:
        return PointSet.from_points(self.points(), self.d)

    def diameter(self) -> int:
        pts = self.points()
        return int(np.max(pts.max(axis=0) - pts.min(axis=0)))

    def max_displacement(self) -> int:
        """max_s |eta(s) - eta(0)|_inf."""
        pts = self.points()
        return int(np.max(np.abs(pts - pts[0])))

    def sub_path(self, a: int, b: int) -> "Trajectory":
        """eta[a, b] = (eta(a + s))_{0 <= s <= b - a}."""
        if not 0 <= a <= b <= self.length:
            raise ValueError(f"sub-path [{a}, {b}] outside [0, {self.length}]")
        return Trajectory(self.point(a), self.steps[a:b])

    def reversed(self) -> "Trajectory":
        """Time reversal: starts at eta(T) and ends at eta(0)."""
        return Trajectory(self.end(), self.steps[::-1] ^ 1)

    def translate(self, shift: PointLike) -> "Trajectory":
        start = tuple(int(a) + int(b) for a, b in zip(self.start, shift))
        return Trajectory(start, self.steps)

    def hitting_time(self, A: PointSet) -> Optional[int]:
        """tau_A: the first time eta is in A, or None."""
        hits = np.flatnonzero(A.contains(self.points()))
        return int(hits[0]) if hits.size else None

    def hits(self, A: PointSet) -> bool:
        return bool(np.any(A.contains(self.points())))

    def translation_equivalent(self, other: "Trajectory") -> bool:
        return self.d == other.d and np.array_equal(self.steps, other.steps)


def concatenate(first: Trajectory, second: Trajectory) -> Trajectory:
    """
    First follow `first`, then the steps of `second` translated to start at
    first's endpoint.
    """
    if first.d != second.d:
        raise ValueError(f"dimension mismatch: {first.d} vs {second.d}")
    return Trajectory(first.start, np.concatenate([first.steps, second.steps]))


def translation_equivalent(first: Trajectory, second: Trajectory) -> bool:
    return first.translation_equivalent(second)


def random_steps(rng: np.random.Generator, d: int, length: int) -> np.ndarray:
    """`length` i.i.d. uniform step codes."""
    if length < 0:
        raise ValueError(f"walk length must be nonnegative, got {length}")
    return rng.integers(0, 2 * d, size=length, dtype=np.uint8)


def walk_from_generator(start: PointLike, length: int, rng: np.random.Generator) -> Trajectory:
    start = as_point(start)
    traj = Trajectory(start, random_steps(rng, len(start), length))
    if debug_asserts_enabled():
        _assert_unit_increments(traj)
    return traj


def sample_srw(start: PointLike, length: int, stream: RngStream) -> Trajectory:
    """
    Simple random walk of `length` steps from `start`.

    Args:
        start: Starting point
        length: Number of steps (0 gives a single-point trajectory)
        stream: Random stream, consumed by this call

    Returns:
        The sampled trajectory
    """
    return walk_from_generator(start, length, stream.generator())


def _assert_unit_increments(traj: Trajectory) -> None:
    pts = traj.points()
    if traj.length:
        inc = np.abs(np.diff(pts, axis=0)).sum(axis=1)
        assert np.all(inc == 1), "trajectory has a non-unit increment"
