"""
Lattice points, boxes and packed point sets on Z^d.

Points are tuples of ints at API boundaries and (n, d) int64 arrays inside
vectorized code. Point sets pack each point into one int64 key and keep the
keys sorted, so membership is a searchsorted. Keys live in a `KeyFrame`: the
global frame (63 // d bits per coordinate around the origin) unless a set
spreads further, in which case it gets a frame fitted to its bounding box.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

MIN_DIMENSION = 4
MAX_KEYS = 1 << 63

Point = Tuple[int, ...]
PointLike = Union[Point, Sequence[int], np.ndarray]


def validate_dimension(d: int) -> int:
    """Reject dimensions below 4 (the walk must be transient with room to spare)."""
    if int(d) != d or d < MIN_DIMENSION:
        raise ValueError(f"dimension must be an integer >= {MIN_DIMENSION}, got {d}")
    return int(d)


def origin(d: int) -> Point:
    return (0,) * validate_dimension(d)


def unit_vector(d: int, axis: int, sign: int = 1) -> Point:
    coords = [0] * d
    coords[axis] = sign
    return tuple(coords)


def linf_norm(p: PointLike) -> int:
    return int(np.max(np.abs(np.asarray(p, dtype=np.int64)))) if len(p) else 0


def l1_norm(p: PointLike) -> int:
    return int(np.sum(np.abs(np.asarray(p, dtype=np.int64))))


def as_point(p: PointLike) -> Point:
    return tuple(int(c) for c in p)


def as_point_array(points: Union[Iterable[PointLike], np.ndarray], d: int) -> np.ndarray:
    """Normalize any collection of points into an (n, d) int64 array."""
    arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, d), dtype=np.int64)
    arr = arr.reshape(-1, d)
    return arr


@lru_cache(maxsize=None)
def unit_moves(d: int) -> np.ndarray:
    """
    Displacement table for step codes.

    Code 2i moves by +e_i and code 2i+1 by -e_i, so `code ^ 1` is the
    reverse move.
    """
    moves = np.zeros((2 * d, d), dtype=np.int64)
    for axis in range(d):
        moves[2 * axis, axis] = 1
        moves[2 * axis + 1, axis] = -1
    moves.setflags(write=False)
    return moves


@dataclass(frozen=True)
class KeyFrame:
    """
    Mixed-radix key layout.

    Axis i holds base[i] .. base[i] + radix[i] - 1 and contributes
    (x_i - base[i]) * stride[i]; axis 0 is least significant.
    """
    base: Tuple[int, ...]
    radix: Tuple[int, ...]

    def __post_init__(self):
        if len(self.base) != len(self.radix):
            raise ValueError("base and radix must have one entry per axis")
        if any(r < 1 for r in self.radix):
            raise ValueError(f"radices must be positive, got {self.radix}")
        if math.prod(self.radix) > MAX_KEYS:
            raise ValueError(f"a key frame of shape {self.radix} exceeds the int64 key space")

    @classmethod
    def fitted(cls, points: np.ndarray) -> "KeyFrame":
        """Smallest frame holding every row of a nonempty (n, d) array."""
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        return cls(tuple(int(c) for c in lo), tuple(int(c) for c in hi - lo + 1))

    @property
    def d(self) -> int:
        return len(self.base)

    @property
    def strides(self) -> np.ndarray:
        return np.concatenate([[1], np.cumprod(self.radix[:-1])]).astype(np.int64)

    def holds(self, points: np.ndarray) -> np.ndarray:
        """Row mask of points inside the frame."""
        shifted = np.asarray(points, dtype=np.int64).reshape(-1, self.d) - np.asarray(self.base, dtype=np.int64)
        return np.all((shifted >= 0) & (shifted < np.asarray(self.radix, dtype=np.int64)), axis=1)

    def pack(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        """
        Keys of an (n, d) array.

        Args:
            points: Points to encode
            strict: Raise on points outside the frame; otherwise they get key -1

        Returns:
            int64 keys, one per row
        """
        points = np.asarray(points, dtype=np.int64).reshape(-1, self.d)
        if points.size == 0:
            return np.zeros(0, dtype=np.int64)
        inside = self.holds(points)
        if strict and not inside.all():
            raise ValueError(f"coordinates outside the key frame {self.base} + {self.radix} for d={self.d}")
        keys = (points - np.asarray(self.base, dtype=np.int64)) @ self.strides
        if not strict:
            keys[~inside] = -1
        return keys

    def unpack(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 1)
        return (keys // self.strides) % np.asarray(self.radix, dtype=np.int64) + np.asarray(self.base, dtype=np.int64)


@lru_cache(maxsize=None)
def global_frame(d: int) -> KeyFrame:
    """The origin-centred frame shared by all sets that fit in it: 63 // d bits per axis."""
    bits = 63 // d
    offset = 1 << (bits - 1)
    return KeyFrame((-offset,) * d, (1 << bits,) * d)


def coordinate_limit(d: int) -> int:
    """Largest |coordinate| a key of the global frame can hold in dimension d."""
    return -global_frame(d).base[0] - 1


def pack(points: np.ndarray, d: int) -> np.ndarray:
    """Pack an (n, d) array of points into global-frame int64 keys."""
    return global_frame(d).pack(points)


def unpack(keys: np.ndarray, d: int) -> np.ndarray:
    return global_frame(d).unpack(keys)


class PointSet:
    """
    Finite set of points of Z^d.

    Stored as a sorted array of packed keys; all set algebra is done on the
    key arrays with numpy set routines. Sets too spread out for the global
    frame carry a frame fitted to their bounding box. Keys handed in or out
    through `contains_keys` are always global-frame keys.
    """

    __slots__ = ("d", "keys", "frame")

    def __init__(self, d: int, keys: Optional[np.ndarray] = None, *, assume_unique: bool = False,
                 frame: Optional[KeyFrame] = None):
        self.d = validate_dimension(d)
        self.frame = frame if frame is not None else global_frame(self.d)
        if keys is None:
            keys = np.zeros(0, dtype=np.int64)
        keys = np.asarray(keys, dtype=np.int64).ravel()
        self.keys = keys if assume_unique else np.unique(keys)

    @classmethod
    def from_points(cls, points: Union[Iterable[PointLike], np.ndarray], d: int) -> "PointSet":
        d = validate_dimension(d)
        arr = as_point_array(points, d)
        frame = global_frame(d)
        if arr.size and not frame.holds(arr).all():
            frame = KeyFrame.fitted(arr)
        return cls(d, frame.pack(arr), frame=frame)

    @classmethod
    def empty(cls, d: int) -> "PointSet":
        return cls(d)

    def __len__(self) -> int:
        return int(self.keys.size)

    def __bool__(self) -> bool:
        return self.keys.size > 0

    def __iter__(self) -> Iterator[Point]:
        for row in self.to_array():
            yield tuple(int(c) for c in row)

    def __contains__(self, point: PointLike) -> bool:
        return bool(self.contains(np.asarray(point, dtype=np.int64).reshape(1, self.d))[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        if self.d != other.d:
            return False
        if self.frame == other.frame:
            return np.array_equal(self.keys, other.keys)
        return len(self) == len(other) and self.issubset(other)

    def __repr__(self) -> str:
        return f"PointSet(d={self.d}, size={len(self)})"

    def _has_own_keys(self, keys: np.ndarray) -> np.ndarray:
        if self.keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        idx = np.searchsorted(self.keys, keys)
        idx = np.minimum(idx, self.keys.size - 1)
        return self.keys[idx] == keys

    def _members_of(self, other: "PointSet") -> np.ndarray:
        """Mask over self's keys of membership in `other`."""
        if self.frame == other.frame:
            return other._has_own_keys(self.keys)
        return other.contains(self.to_array())

    def contains_keys(self, keys: np.ndarray) -> np.ndarray:
        """Membership for global-frame keys (any shape)."""
        keys = np.asarray(keys, dtype=np.int64)
        if self.frame == global_frame(self.d):
            return self._has_own_keys(keys)
        flat = keys.ravel()
        found = np.zeros(flat.shape, dtype=bool)
        valid = flat >= 0
        found[valid] = self.contains(unpack(flat[valid], self.d))
        return found.reshape(keys.shape)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n, d) array; any coordinates allowed."""
        return self._has_own_keys(self.frame.pack(points, strict=False))

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Index of each point in `to_array()` order, -1 where absent."""
        keys = self.frame.pack(points, strict=False)
        if self.keys.size == 0:
            return np.full(keys.shape, -1, dtype=np.int64)
        idx = np.minimum(np.searchsorted(self.keys, keys), self.keys.size - 1)
        return np.where(self.keys[idx] == keys, idx, -1)

    def subset(self, mask: np.ndarray) -> "PointSet":
        """The points selected by a boolean mask over `to_array()` order."""
        return PointSet(self.d, self.keys[mask], assume_unique=True, frame=self.frame)

    def to_array(self) -> np.ndarray:
        return self.frame.unpack(self.keys)

    def union(self, other: "PointSet") -> "PointSet":
        if self.frame == other.frame:
            return PointSet(self.d, np.union1d(self.keys, other.keys), assume_unique=True, frame=self.frame)
        return PointSet.from_points(np.concatenate([self.to_array(), other.to_array()]), self.d)

    def intersection(self, other: "PointSet") -> "PointSet":
        return self.subset(self._members_of(other))

    def difference(self, other: "PointSet") -> "PointSet":
        return self.subset(~self._members_of(other))

    def isdisjoint(self, other: "PointSet") -> bool:
        return not bool(np.any(self._members_of(other)))

    def issubset(self, other: "PointSet") -> bool:
        return bool(np.all(self._members_of(other)))

    def translate(self, shift: PointLike) -> "PointSet":
        return PointSet.from_points(self.to_array() + np.asarray(shift, dtype=np.int64), self.d)

    def sorted_points(self) -> np.ndarray:
        """Points in lexicographic coordinate order."""
        arr = self.to_array()
        if len(arr) == 0:
            return arr
        order = np.lexsort(arr.T[::-1])
        return arr[order]

    def diameter(self) -> int:
        if len(self) == 0:
            return 0
        arr = self.to_array()
        return int(np.max(arr.max(axis=0) - arr.min(axis=0)))


def union_all(sets: Iterable[PointSet], d: int) -> PointSet:
    sets = list(sets)
    if not sets:
        return PointSet.empty(d)
    if all(s.frame == global_frame(d) for s in sets):
        return PointSet(d, np.concatenate([s.keys for s in sets]))
    return PointSet.from_points(np.concatenate([s.to_array() for s in sets]), d)


@dataclass(frozen=True)
class Box:
    """
    An l-infinity box.

    `centered` boxes are B(x, r) = {y : |y - x|_inf <= r}; `corner` boxes are
    x + [0, R)^d.
    """
    anchor: Point
    size: int
    kind: str = "centered"

    def __post_init__(self):
        if self.size < 0:
            raise ValueError(f"box size must be nonnegative, got {self.size}")
        if self.kind not in ("centered", "corner"):
            raise ValueError(f"unknown box kind: {self.kind}")
        if self.kind == "corner" and self.size == 0:
            raise ValueError("corner boxes need a positive side length")

    @classmethod
    def centered(cls, x: PointLike, r: int) -> "Box":
        return cls(as_point(x), int(r), "centered")

    @classmethod
    def corner(cls, x: PointLike, side: int) -> "Box":
        return cls(as_point(x), int(side), "corner")

    @property
    def d(self) -> int:
        return len(self.anchor)

    @property
    def lower(self) -> np.ndarray:
        anchor = np.asarray(self.anchor, dtype=np.int64)
        return anchor - self.size if self.kind == "centered" else anchor

    @property
    def upper(self) -> np.ndarray:
        """Inclusive upper corner."""
        anchor = np.asarray(self.anchor, dtype=np.int64)
        return anchor + self.size if self.kind == "centered" else anchor + self.size - 1

    @property
    def side(self) -> int:
        return 2 * self.size + 1 if self.kind == "centered" else self.size

    def volume(self) -> int:
        return self.side ** self.d

    def contains(self, point: PointLike) -> bool:
        p = np.asarray(point, dtype=np.int64)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def contains_array(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64).reshape(-1, self.d)
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)

    def on_boundary_array(self, points: np.ndarray) -> np.ndarray:
        """Points of the box with some coordinate on a face."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, self.d)
        inside = self.contains_array(points)
        face = np.any((points == self.lower) | (points == self.upper), axis=1)
        return inside & face

    def padded(self, margin: int) -> "Box":
        if self.kind == "centered":
            return Box.centered(self.anchor, self.size + margin)
        return Box.corner(tuple(np.asarray(self.anchor) - margin), self.size + 2 * margin)

    def points(self) -> np.ndarray:
        """All lattice points, lexicographic order."""
        axes = [np.arange(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)]
        grid = np.meshgrid(*axes, indexing='ij')
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)


def dilated_volume(points: np.ndarray, radius: int, d: int) -> int:
    """
    |B(A, r)| for a finite point set A: the number of lattice points within
    l-infinity distance r of A.

    Computed on the bounding grid with a separable maximum filter.
    """
    points = as_point_array(points, d)
    if len(points) == 0:
        return 0
    radius = int(radius)
    lo = points.min(axis=0) - radius
    hi = points.max(axis=0) + radius
    shape = tuple(int(s) for s in hi - lo + 1)
    grid = np.zeros(shape, dtype=np.uint8)
    grid[tuple((points - lo).T)] = 1
    if radius > 0:
        grid = ndimage.maximum_filter(grid, size=2 * radius + 1, mode='constant', cval=0)
    return int(grid.sum(dtype=np.int64))


def neighbors(p: PointLike) -> np.ndarray:
    """The 2d nearest neighbors of p, in step-code order."""
    p = np.asarray(p, dtype=np.int64)
    return p + unit_moves(len(p))
