"""
Batched random-walk kernels.

Many independent walks are advanced together in (walks x time-chunk)
blocks; walks that have met their target are dropped from later chunks.
"""

from typing import Union

import numpy as np

from ..lattice.points import PointSet, unit_moves

BLOCK_CELLS = 1 << 20


def first_entry_times(starts: np.ndarray, A: PointSet, max_steps: Union[int, np.ndarray],
                      rng: np.random.Generator, start_time: int = 1) -> np.ndarray:
    """
    First time t in [start_time, max_steps] at which each walk is in A.

    Args:
        starts: (n, d) starting points, one walk per row
        A: Target set
        max_steps: Per-walk (or common) step budget
        rng: Generator
        start_time: 1 for the return time H~_A, 0 for the hitting time H_A

    Returns:
        int64 array of entry times, -1 where the walk stayed out of A
    """
    starts = np.asarray(starts, dtype=np.int64)
    n, d = starts.shape
    budgets = np.broadcast_to(np.asarray(max_steps, dtype=np.int64), (n,)).copy()
    result = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return result
    if start_time == 0:
        at_start = A.contains(starts)
        result[at_start] = 0
    else:
        at_start = np.zeros(n, dtype=bool)

    moves = unit_moves(d)
    position = starts.copy()
    alive = np.flatnonzero(~at_start & (budgets >= 1))
    t = 0
    while alive.size:
        chunk = int(max(1, min(BLOCK_CELLS // (alive.size * d), int(budgets[alive].max()) - t)))
        steps = rng.integers(0, 2 * d, size=(alive.size, chunk), dtype=np.uint8)
        path = np.cumsum(moves[steps], axis=1) + position[alive, None, :]
        inside = A.contains(path.reshape(-1, d)).reshape(alive.size, chunk)
        times = t + 1 + np.arange(chunk)
        inside &= times[None, :] <= budgets[alive, None]
        hit_any = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        result[alive[hit_any]] = t + 1 + first[hit_any]
        position[alive] = path[:, -1, :]
        t += chunk
        keep = ~hit_any & (budgets[alive] > t)
        alive = alive[keep]
    return result


def escape_indicators(starts: np.ndarray, A: PointSet, max_steps: Union[int, np.ndarray],
                      rng: np.random.Generator) -> np.ndarray:
    """1{H~_A > max_steps} per walk."""
    return first_entry_times(starts, A, max_steps, rng, start_time=1) < 0


def visit_counts(start: np.ndarray, target: np.ndarray, steps: int, walks: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Number of visits to `target` at times 0..steps, for `walks` walks from `start`."""
    start = np.asarray(start, dtype=np.int64)
    d = start.size
    moves = unit_moves(d)
    target = np.asarray(target, dtype=np.int64).reshape(d)
    counts = np.full(walks, int(np.array_equal(start, target)), dtype=np.int64)
    position = np.broadcast_to(start, (walks, d)).copy()
    t = 0
    while t < steps:
        chunk = int(max(1, min(BLOCK_CELLS // (walks * d), steps - t)))
        codes = rng.integers(0, 2 * d, size=(walks, chunk), dtype=np.uint8)
        path = np.cumsum(moves[codes], axis=1) + position[:, None, :]
        counts += np.all(path == target, axis=2).sum(axis=1)
        position = path[:, -1, :]
        t += chunk
    return counts


def escape_probabilities(points: np.ndarray, A: PointSet, max_steps: Union[int, np.ndarray],
                         walks: int, rng: np.random.Generator) -> np.ndarray:
    """
    Fraction of `walks` walks from each point that avoid A at times 1..max_steps.

    Args:
        points: (n, d) starting points
        A: Target set
        max_steps: Common budget, or one budget per walk (length n * walks)
        walks: Walks per point
        rng: Generator

    Returns:
        (n,) array of escape frequencies
    """
    points = np.asarray(points, dtype=np.int64)
    starts = np.repeat(points, walks, axis=0)
    return escape_indicators(starts, A, max_steps, rng).reshape(len(points), walks).mean(axis=1)
