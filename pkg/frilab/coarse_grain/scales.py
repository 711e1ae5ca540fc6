"""
Renormalization scales of the coarse-grained exploration.

All scales derive from R = floor(sqrt(mu_1)); the d = 4 forms carry the
logarithmic corrections. Every derived length can be overridden from
TypicalityParams so that desk-scale runs stay meaningful.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..laws.length_law import EPSILON_4, LengthDistribution
from ..lattice.points import Box, Point, linf_norm, validate_dimension
from ..models.params import AlgorithmParams, TypicalityParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scales:
    """
    Derived lengths for one (rho, d) pair.

    R: coarse box side; L: sausage radius; I: interaction scale;
    T_block: block length of E4; C_tilde: capacity scale of good sequences;
    return_cutoff: the d = 4 return-time cutoff of the *-proper part.
    """
    d: int
    R: int
    L: float
    I: float
    T_block: int
    C_tilde: float
    return_cutoff: int
    mu1: float
    epsilon_d: float
    k: float
    K: float
    M: float
    gamma: float

    @property
    def log_mu1(self) -> float:
        return math.log(self.mu1)

    @property
    def z(self) -> Point:
        """floor(R/2) (1, ..., 1)."""
        return (self.R // 2,) * self.d

    @property
    def band(self) -> Tuple[int, int]:
        """Inclusive length band [k R^2, K R^2] of E1."""
        return math.ceil(self.k * self.R ** 2), math.floor(self.K * self.R ** 2)

    @property
    def time_window(self) -> float:
        """Half-width R^2 / I of the excluded window around the hitting time."""
        return self.R ** 2 / self.I

    @property
    def ruin_radius(self) -> int:
        """Coarse l-infinity radius of B(x, 2 gamma R)."""
        return int(math.floor(2 * self.gamma))

    def capacity_scale(self, T: int) -> float:
        """Expected capacity of a T-step range: eps_d T, or (pi^2/8) T / log mu_1 in d = 4."""
        if self.d == 4:
            return EPSILON_4 * T / self.log_mu1
        if not math.isfinite(self.epsilon_d):
            raise ValueError(f"capacity checks in d={self.d} need an epsilon_d estimate")
        return self.epsilon_d * T

    def position(self, x: Point) -> Point:
        """Lattice position R x of a coarse vertex."""
        return tuple(self.R * int(c) for c in x)

    def coarse_box(self, x: Point) -> Box:
        """B_x = R x + [0, R)^d."""
        return Box.corner(self.position(x), self.R)

    def inner_box(self, x: Point) -> Box:
        """B~_x = B(R x + z, R/4)."""
        center = tuple(p + h for p, h in zip(self.position(x), self.z))
        return Box.centered(center, self.R // 4)

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record['band'] = list(self.band)
        return record


def derive_scales(rho: LengthDistribution, d: int, params: Optional[TypicalityParams] = None,
                  algorithm: Optional[AlgorithmParams] = None,
                  epsilon_d: Optional[float] = None) -> Scales:
    """
    Compute the scales from mu_1(rho).

    Args:
        rho: Length law; needs mu_1 >= 4 so that R >= 2
        d: Dimension
        params: Typicality constants and overrides
        algorithm: Supplies alpha for gamma = 2 alpha M + 2
        epsilon_d: Capacity constant for d >= 5; without it E2 and E4 cannot be checked

    Returns:
        Scales
    """
    d = validate_dimension(d)
    params = params or TypicalityParams()
    algorithm = algorithm or AlgorithmParams()
    mu1 = rho.mu1
    R = int(math.floor(math.sqrt(mu1)))
    if R < 2:
        raise ValueError(f"coarse scales need mu_1 >= 4, got {mu1}")
    c = params.c
    log_R = math.log(R)
    if d == 4:
        L = R * log_R ** (-c)
        I = log_R ** c
        T_block = math.floor(R ** 2 / math.log(mu1))
        C_tilde = R ** 2 / math.log(R ** 2)
        return_cutoff = math.floor(R ** 2 * log_R ** (-10))
    else:
        L = R ** ((2 + c) / (d - 2))
        I = R ** c
        T_block = math.floor(R ** (2 - c / 4))
        C_tilde = float(R ** 2)
        return_cutoff = math.floor(R ** (2 - c))
    if params.L_override is not None:
        L = params.L_override
    if params.I_override is not None:
        I = params.I_override
    if params.T_block_override is not None:
        T_block = params.T_block_override
    if params.return_cutoff_override is not None:
        return_cutoff = params.return_cutoff_override
    scales = Scales(d=d, R=R, L=float(L), I=float(I), T_block=max(int(T_block), 1), C_tilde=float(C_tilde),
                    return_cutoff=int(return_cutoff), mu1=float(mu1),
                    epsilon_d=_epsilon(d, epsilon_d),
                    k=params.k, K=params.K, M=params.M, gamma=algorithm.resolved_gamma(params.M))
    logger.debug(f"Scales d={d}: {scales.to_dict()}")
    return scales


def _epsilon(d: int, epsilon_d: Optional[float]) -> float:
    if d == 4:
        return EPSILON_4
    return float(epsilon_d) if epsilon_d is not None else math.nan


def coarse_order(x: Point) -> Tuple[int, Point]:
    """Canonical order on coarse vertices: l-infinity norm, then lexicographic."""
    return linf_norm(x), tuple(x)


def coarse_neighbors(x: Point) -> List[Point]:
    """x +- e_j for j = 1..d, in step-code order."""
    d = len(x)
    out = []
    for j in range(d):
        for sign in (1, -1):
            y = list(x)
            y[j] += sign
            out.append(tuple(y))
    return out


def coarse_ball(x: Point, radius: int) -> Iterator[Point]:
    """Coarse vertices within l-infinity distance `radius` of x."""
    box = Box.centered(x, radius)
    for p in box.points():
        yield tuple(int(c) for c in p)


def coarse_window(d: int, radius: int) -> List[Point]:
    """All coarse vertices of B(0, radius) in canonical order."""
    points = Box.centered((0,) * d, radius).points()
    return sorted((tuple(int(c) for c in p) for p in points), key=coarse_order)


def in_window(x: Point, radius: int) -> bool:
    return int(np.max(np.abs(x))) <= radius
