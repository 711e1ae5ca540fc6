"""
The finitely dependent site percolation omega^q.

Independent Bernoulli(q) marks xi_y are placed on coarse vertices; a site x
is open (omega_x = 1) when no mark lies in B(x, 2 gamma). Sites at distance
more than 4 gamma are independent.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from ..lattice.points import Box, PointSet, validate_dimension
from ..lattice.rng import RngStream

logger = logging.getLogger(__name__)

CHUNK_CELLS = 1 << 22


@dataclass
class OmegaSample:
    """omega^q on B(0, radius) as a boolean grid indexed from the lower corner."""
    q: float
    gamma: float
    radius: int
    open_sites: np.ndarray
    origin_cluster: PointSet

    @property
    def d(self) -> int:
        return self.open_sites.ndim

    @property
    def density(self) -> float:
        return float(self.open_sites.mean())

    def is_open(self, x: Tuple[int, ...]) -> bool:
        return bool(self.open_sites[tuple(int(c) + self.radius for c in x)])


def mark_radius(gamma: float) -> int:
    """Lattice radius of B(x, 2 gamma)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return int(math.floor(2 * gamma))


def open_probability(q: float, gamma: float, d: int) -> float:
    """P[omega_x = 1] = (1 - q)^((2 floor(2 gamma) + 1)^d)."""
    return (1 - q) ** ((2 * mark_radius(gamma) + 1) ** d)


def _check_q(q: float) -> None:
    if not 0 <= q <= 1:
        raise ValueError(f"mark probability must lie in [0, 1], got {q}")


def _labels(open_sites: np.ndarray) -> Tuple[np.ndarray, int]:
    structure = ndimage.generate_binary_structure(open_sites.ndim, 1)
    return ndimage.label(open_sites, structure=structure)


def sample_omega_q(q: float, gamma: float, d: int, radius: int, stream: RngStream) -> OmegaSample:
    """
    Sample omega^q on the coarse window B(0, radius).

    Marks are drawn on the window padded by 2 gamma so that every site sees
    its full neighborhood.

    Args:
        q: Mark probability
        gamma: Dependence range parameter
        d: Dimension
        radius: Coarse window radius
        stream: Random stream

    Returns:
        OmegaSample with the origin's open cluster (empty if the origin is closed)
    """
    _check_q(q)
    d = validate_dimension(d)
    r = mark_radius(gamma)
    side = 2 * (radius + r) + 1
    marks = stream.generator().random((side,) * d) < q
    closed = ndimage.maximum_filter(marks.astype(np.uint8), size=2 * r + 1, mode='constant', cval=0)
    inner = tuple(slice(r, side - r) for _ in range(d))
    open_sites = closed[inner] == 0
    labels, _ = _labels(open_sites)
    center = (radius,) * d
    label = labels[center]
    if label == 0:
        cluster = PointSet.empty(d)
    else:
        cluster = PointSet.from_points(np.argwhere(labels == label) - radius, d)
    logger.debug(f"omega^q q={q} gamma={gamma}: density {open_sites.mean():.4f}, origin cluster {len(cluster)}")
    return OmegaSample(q, gamma, radius, open_sites, cluster)


def largest_cluster_spans(sample: OmegaSample) -> bool:
    """Does the largest open cluster touch both faces of the window in every direction?"""
    labels, n = _labels(sample.open_sites)
    if n == 0:
        return False
    sizes = np.bincount(labels.ravel())[1:]
    largest = int(np.argmax(sizes)) + 1
    points = np.argwhere(labels == largest) - sample.radius
    box = Box.centered((0,) * sample.d, sample.radius)
    return bool(np.all(points.min(axis=0) == box.lower) and np.all(points.max(axis=0) == box.upper))


def omega_site_frequency(q: float, gamma: float, d: int, n_sites: int, stream: RngStream) -> Tuple[float, float]:
    """
    Empirical P[omega_x = 1] over independent sites.

    Sites are taken on the sublattice (4 gamma + 1) Z^d, whose neighborhoods
    B(x, 2 gamma) tile the mark field, so their states are independent.

    Returns:
        (frequency, binomial standard error)
    """
    _check_q(q)
    if n_sites < 1:
        raise ValueError(f"need at least one site, got {n_sites}")
    r = mark_radius(gamma)
    block = (2 * r + 1) ** validate_dimension(d)
    rng = stream.generator()
    open_count = 0
    chunk = max(1, CHUNK_CELLS // block)
    for lo in range(0, n_sites, chunk):
        n = min(chunk, n_sites - lo)
        marks = rng.random((n, block)) < q
        open_count += int(np.count_nonzero(~marks.any(axis=1)))
    freq = open_count / n_sites
    return freq, math.sqrt(max(freq * (1 - freq), 0.0) / n_sites)
