"""
Length laws for trajectory durations.

Every law exposes its pmf, moments mu_k = sum l^k rho(l), tail moments
mu_k^(m) = sum_{l >= m} l^k rho(l), sampling, and the rerooted (m, l) split
used by the hitting-law sampler. Geometric laws keep closed forms for every
moment query and are only truncated (at a 1e-15 tail) where a finite table
is unavoidable, i.e. when sampling tilted versions of them.
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb, stirling2

logger = logging.getLogger(__name__)

EPSILON_4 = math.pi ** 2 / 8
PMF_TOLERANCE = 1e-12
TABLE_TAIL = 1e-15

Band = Optional[Tuple[int, int]]


def _check_band(band: Band) -> Band:
    if band is None:
        return None
    lo, hi = int(band[0]), int(band[1])
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid length band [{lo}, {hi}]")
    return lo, hi


class LengthDistribution(ABC):
    """A probability law rho on the nonnegative integers."""

    family = "abstract"

    @abstractmethod
    def pmf(self, l):
        """rho(l); accepts scalars or integer arrays."""

    @abstractmethod
    def moment(self, k: int) -> float:
        """mu_k(rho)."""

    @abstractmethod
    def tail_moment(self, k: int, m: int) -> float:
        """mu_k^(m)(rho) = sum_{l >= m} l^k rho(l)."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """`size` i.i.d. draws as an int64 array."""

    @abstractmethod
    def to_spec(self) -> Dict[str, Any]:
        """JSON form {"family": ..., "params": {...}}."""

    @property
    def support_max(self) -> Optional[int]:
        """Largest support point, or None for unbounded support."""
        values, _ = self.table()
        return int(values[-1])

    @abstractmethod
    def table(self) -> Tuple[np.ndarray, np.ndarray]:
        """Finite (values, probabilities) representation, values ascending."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({json.dumps(self.to_spec()['params'])})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LengthDistribution):
            return NotImplemented
        return self.to_spec() == other.to_spec()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_spec(), sort_keys=True))

    @cached_property
    def mu1(self) -> float:
        return self.moment(1)

    @cached_property
    def mu2(self) -> float:
        return self.moment(2)

    def cdf(self, l: int) -> float:
        return 1.0 - self.tail_moment(0, l + 1)

    def quantile(self, p: float) -> int:
        """Smallest l with P[T <= l] >= p."""
        if not 0 <= p <= 1:
            raise ValueError(f"quantile level must lie in [0, 1], got {p}")
        values, probs = self.table()
        idx = int(np.searchsorted(np.cumsum(probs), p - 1e-15))
        return int(values[min(idx, len(values) - 1)])

    def tail_weight(self, m) -> np.ndarray:
        """mu_0^(m) / (mu_1 + 1): the weight of P^x[H_A > m] in e_A^(rho)."""
        m = np.atleast_1d(np.asarray(m, dtype=np.int64))
        return np.array([self.tail_moment(0, int(v)) for v in m]) / (self.mu1 + 1.0)

    def band_mass(self, band: Band = None) -> float:
        """sum over the band of (T+1) rho(T) / (mu_1 + 1); 1 without a band."""
        band = _check_band(band)
        if band is None:
            return 1.0
        lo, hi = band

        def upper(m: int) -> float:
            return self.tail_moment(1, m) + self.tail_moment(0, m)

        return (upper(lo) - upper(hi + 1)) / (self.mu1 + 1.0)

    def rerooted_split(self, rng: np.random.Generator, size: int,
                       band: Band = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Sample (m, l) pairs with probability proportional to rho(m + l).

        Equivalently: the total length T has weights (T+1) rho(T), optionally
        restricted to `band`, and m is uniform on {0, ..., T}.

        Args:
            rng: Generator to draw from
            size: Number of pairs
            band: Optional inclusive [T_lo, T_hi] restriction on m + l

        Returns:
            Tuple of int64 arrays (m, l)
        """
        band = _check_band(band)
        values, probs = self.table()
        weights = (values + 1.0) * probs
        if band is not None:
            weights = np.where((values >= band[0]) & (values <= band[1]), weights, 0.0)
        total = weights.sum()
        if total <= 0:
            raise ValueError(f"length band {band} carries no mass under {self!r}")
        totals = rng.choice(values, size=size, p=weights / total)
        m = rng.integers(0, totals + 1)
        return m.astype(np.int64), (totals - m).astype(np.int64)

    def size_biased(self) -> "LengthDistribution":
        """The law k rho(k) / mu_1."""
        return SizeBiased(self)

    def appropriateness_theta(self, C: float) -> float:
        return appropriateness_theta(self, C)


class Geometric(LengthDistribution):
    """Geo(lambda)(n) = lambda (1 - lambda)^n on {0, 1, ...}; mean T = (1 - lambda) / lambda."""

    family = "geometric"

    def __init__(self, lam: float):
        if not 0 < lam <= 1:
            raise ValueError(f"geometric parameter must lie in (0, 1], got {lam}")
        self.lam = float(lam)
        self.q = 1.0 - self.lam

    @classmethod
    def with_mean(cls, T: float) -> "Geometric":
        if T < 0:
            raise ValueError(f"geometric mean must be nonnegative, got {T}")
        return cls(1.0 / (T + 1.0))

    @property
    def mean(self) -> float:
        return self.q / self.lam

    @property
    def support_max(self) -> Optional[int]:
        return None if self.q > 0 else 0

    def pmf(self, l):
        l = np.asarray(l)
        return np.where(l >= 0, self.lam * self.q ** np.maximum(l, 0), 0.0)

    def moment(self, k: int) -> float:
        k = _check_order(k)
        ratio = self.q / self.lam
        return float(sum(stirling2(k, j, exact=True) * math.factorial(j) * ratio ** j
                         for j in range(k + 1)))

    def tail_moment(self, k: int, m: int) -> float:
        # Memorylessness: T >= m given, T - m is again Geo(lambda).
        if m < 0:
            raise ValueError(f"tail index must be nonnegative, got {m}")
        if k == 0:
            return float(self.q ** m)
        k = _check_order(k)
        shifted = sum(comb(k, i, exact=True) * float(m) ** (k - i) * (self.moment(i) if i else 1.0)
                      for i in range(k + 1))
        return float(self.q ** m * shifted)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.q == 0:
            return np.zeros(size, dtype=np.int64)
        u = 1.0 - rng.random(size)
        return np.floor(np.log(u) / math.log(self.q)).astype(np.int64)

    def quantile(self, p: float) -> int:
        if not 0 <= p <= 1:
            raise ValueError(f"quantile level must lie in [0, 1], got {p}")
        if self.q == 0 or p <= self.lam:
            return 0
        if p >= 1:
            raise ValueError("the geometric law has no finite 1-quantile")
        return int(math.ceil(math.log(1 - p) / math.log(self.q) - 1 - 1e-12))

    def table(self) -> Tuple[np.ndarray, np.ndarray]:
        cutoff = 0 if self.q == 0 else int(math.ceil(math.log(TABLE_TAIL) / math.log(self.q)))
        values = np.arange(cutoff + 1, dtype=np.int64)
        probs = self.pmf(values)
        return values, probs / probs.sum()

    def rerooted_split(self, rng: np.random.Generator, size: int,
                       band: Band = None) -> Tuple[np.ndarray, np.ndarray]:
        if band is not None:
            return super().rerooted_split(rng, size, band)
        # Memoryless splitting: the two pieces are independent Geo(lambda).
        return self.sample(rng, size), self.sample(rng, size)

    def to_spec(self) -> Dict[str, Any]:
        return {'family': self.family, 'params': {'lambda': self.lam}}


class Dirac(LengthDistribution):
    """delta_n."""

    family = "dirac"

    def __init__(self, n: int):
        if int(n) != n or n < 0:
            raise ValueError(f"Dirac location must be a nonnegative integer, got {n}")
        self.n = int(n)

    def pmf(self, l):
        return np.where(np.asarray(l) == self.n, 1.0, 0.0)

    def moment(self, k: int) -> float:
        return float(self.n ** _check_order(k))

    def tail_moment(self, k: int, m: int) -> float:
        if m < 0:
            raise ValueError(f"tail index must be nonnegative, got {m}")
        return float(self.n ** k) if self.n >= m else 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.n, dtype=np.int64)

    def table(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([self.n], dtype=np.int64), np.array([1.0])

    def to_spec(self) -> Dict[str, Any]:
        return {'family': self.family, 'params': {'n': self.n}}


class PmfTable(LengthDistribution):
    """An explicit pmf with finite support."""

    family = "pmf"

    def __init__(self, values: Sequence[int], probs: Sequence[float]):
        values = np.asarray(values, dtype=np.int64)
        probs = np.asarray(probs, dtype=float)
        if values.shape != probs.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("pmf needs matching nonempty value and probability lists")
        if np.any(values < 0):
            raise ValueError("pmf support must be nonnegative")
        if np.any(probs < 0) or not np.isfinite(probs).all():
            raise ValueError("pmf probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > PMF_TOLERANCE:
            raise ValueError(f"pmf sums to {probs.sum():.15f}, not 1")
        uniq, inverse = np.unique(values, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, probs)
        keep = merged > 0
        self.values = uniq[keep]
        self.probs = merged[keep]

    def pmf(self, l):
        l = np.asarray(l)
        idx = np.searchsorted(self.values, l)
        idx = np.minimum(idx, self.values.size - 1)
        return np.where(self.values[idx] == l, self.probs[idx], 0.0)

    def moment(self, k: int) -> float:
        k = _check_order(k)
        return float(np.sum(self.values.astype(float) ** k * self.probs))

    def tail_moment(self, k: int, m: int) -> float:
        if m < 0:
            raise ValueError(f"tail index must be nonnegative, got {m}")
        mask = self.values >= m
        return float(np.sum(self.values[mask].astype(float) ** k * self.probs[mask]))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.values, size=size, p=self.probs).astype(np.int64)

    def table(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.values, self.probs

    def to_spec(self) -> Dict[str, Any]:
        return {'family': self.family,
                'params': {'values': self.values.tolist(), 'probs': self.probs.tolist()}}


class Scaled(PmfTable):
    """The law of floor(l * xi) for a finitely supported base law xi."""

    family = "scaled"

    def __init__(self, scale: float, base_values: Sequence[float], base_probs: Sequence[float]):
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        base_values = np.asarray(base_values, dtype=float)
        if np.any(base_values < 0):
            raise ValueError("base law support must be nonnegative")
        self.scale = float(scale)
        self.base_values = base_values
        self.base_probs = np.asarray(base_probs, dtype=float)
        super().__init__(np.floor(self.scale * base_values).astype(np.int64), self.base_probs)

    def to_spec(self) -> Dict[str, Any]:
        return {'family': self.family,
                'params': {'l': self.scale, 'values': self.base_values.tolist(),
                           'probs': self.base_probs.tolist()}}


class SizeBiased(LengthDistribution):
    """rho_hat(k) = k rho(k) / mu_1(rho)."""

    family = "size-biased"

    def __init__(self, base: LengthDistribution):
        if base.mu1 <= 0:
            raise ValueError("size-biasing needs a law with positive mean")
        self.base = base

    @property
    def support_max(self) -> Optional[int]:
        return self.base.support_max

    def pmf(self, l):
        l = np.asarray(l)
        return l * self.base.pmf(l) / self.base.mu1

    def moment(self, k: int) -> float:
        return self.base.moment(_check_order(k) + 1) / self.base.mu1

    def tail_moment(self, k: int, m: int) -> float:
        return self.base.tail_moment(k + 1, m) / self.base.mu1

    def table(self) -> Tuple[np.ndarray, np.ndarray]:
        values, probs = self.base.table()
        biased = values * probs
        keep = biased > 0
        return values[keep], biased[keep] / biased[keep].sum()

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        values, probs = self.table()
        return rng.choice(values, size=size, p=probs).astype(np.int64)

    def to_spec(self) -> Dict[str, Any]:
        return {'family': self.family, 'params': {'base': self.base.to_spec()}}


def _check_order(k: int) -> int:
    if int(k) != k or k < 0:
        raise ValueError(f"moment order must be a nonnegative integer, got {k}")
    return int(k)


def moment(rho: LengthDistribution, k: int) -> float:
    """mu_k(rho)."""
    if k < 1:
        raise ValueError(f"moment order must be positive, got {k}")
    value = rho.moment(k)
    if not math.isfinite(value):
        raise ValueError(f"moment {k} of {rho!r} diverges")
    return value


def tail_moment(rho: LengthDistribution, k: int, m: int) -> float:
    """mu_k^(m)(rho)."""
    return rho.tail_moment(k, m)


def appropriateness_theta(rho: LengthDistribution, C: float) -> float:
    """
    theta(rho, C) = sum_{L >= C mu_1} rho(L) L^2 / mu_2.

    Args:
        rho: Length law
        C: Nonnegative multiple of the mean

    Returns:
        Share of the second moment carried by lengths at least C mu_1
    """
    if C < 0:
        raise ValueError(f"C must be nonnegative, got {C}")
    if rho.mu2 == 0:
        raise ValueError("theta is undefined when mu_2 = 0")
    cutoff = int(math.ceil(C * rho.mu1 - 1e-12))
    return rho.tail_moment(2, max(cutoff, 0)) / rho.mu2


def reference_intensity(rho: LengthDistribution, d: int, epsilon_d: float) -> float:
    """
    u_n = mu_1 (1 + log mu_1 1_{d=4}) / (epsilon_d mu_2).

    Args:
        rho: Length law
        d: Dimension
        epsilon_d: Capacity constant for dimension d (pi^2/8 when d = 4)

    Returns:
        The reference intensity
    """
    if epsilon_d <= 0:
        raise ValueError(f"epsilon_d must be positive, got {epsilon_d}")
    if rho.mu1 <= 0:
        raise ValueError("reference intensity needs mu_1 > 0")
    log_factor = 1.0 + (math.log(rho.mu1) if d == 4 else 0.0)
    return rho.mu1 * log_factor / (epsilon_d * rho.mu2)


def perturbed(u: float, epsilon: float) -> Tuple[float, float]:
    """(u^-, u^+) = ((1 - epsilon) u, (1 + epsilon) u)."""
    if not 0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must lie in [0, 1/2), got {epsilon}")
    return (1 - epsilon) * u, (1 + epsilon) * u


def default_epsilon(d: int, estimates: Optional[Dict[str, float]] = None) -> float:
    """
    epsilon_d: pi^2/8 in d = 4, otherwise the stored estimate for d.

    Args:
        d: Dimension
        estimates: Mapping "d" -> estimated epsilon_d from a previous epsilon run
    """
    if d == 4:
        return EPSILON_4
    if estimates and str(d) in estimates:
        return float(estimates[str(d)])
    raise ValueError(f"no epsilon_{d} estimate configured; run an epsilon experiment for d={d} first")


def from_spec(spec: Dict[str, Any]) -> LengthDistribution:
    """Build a law from {"family": ..., "params": {...}}."""
    family = spec.get('family')
    params = spec.get('params', {})
    if family == 'geometric':
        if 'lambda' in params:
            return Geometric(params['lambda'])
        return Geometric.with_mean(params['T'])
    if family == 'dirac':
        return Dirac(params['n'])
    if family == 'pmf':
        return PmfTable(params['values'], params['probs'])
    if family == 'scaled':
        return Scaled(params['l'], params['values'], params['probs'])
    if family == 'size-biased':
        return SizeBiased(from_spec(params['base']))
    raise ValueError(f"unknown length family: {family!r}")


def parse_shorthand(text: str) -> LengthDistribution:
    """
    Parse `geometric:T`, `dirac:n`, or a JSON law spec.

    Examples:
        geometric:4   -> mean-4 geometric law
        dirac:8       -> delta_8
    """
    text = text.strip()
    if text.startswith('{'):
        return from_spec(json.loads(text))
    family, _, value = text.partition(':')
    if family in ('geometric', 'geo'):
        return Geometric.with_mean(float(value))
    if family == 'dirac':
        return Dirac(int(value))
    raise ValueError(f"cannot parse length law {text!r}; use geometric:T, dirac:n or JSON")
