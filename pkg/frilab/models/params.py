"""
Parameter models shared by the estimators, samplers and the Algorithm.

Defaults are desk-scale engineering choices; every field can be overridden
from an experiment configuration.
"""

from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

EVENTS = ("E1", "E2", "E3", "E4")


class PotentialConfig(BaseModel):
    """How potential-theoretic quantities are computed."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    method: Literal['exact-dirichlet', 'monte-carlo'] = 'monte-carlo'
    annulus_radius: Optional[int] = Field(default=None, ge=1)
    mc_walks: int = Field(default=256, ge=1)
    escape_cutoff_steps: int = Field(default=4096, ge=1)
    subsample_points: int = Field(default=4096, ge=1)
    tolerance: float = Field(default=1e-10, gt=0)
    green_table_radius: Optional[int] = Field(default=None, ge=2)


class TypicalityParams(BaseModel):
    """
    Constants of the typical-trajectory events and proper parts.

    `events` selects which of E1..E4 are checked; the scale overrides replace
    the derived L_n, I_n, T'_n and the d = 4 return cutoff when set.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    k: float = Field(default=0.25, gt=0)
    K: float = Field(default=4.0, gt=0)
    M: float = Field(default=4.0, gt=0)
    theta1: float = Field(default=0.1, gt=0, lt=1)
    theta2: float = Field(default=0.1, ge=0, lt=1)
    c: float = 0.01
    events: Tuple[str, ...] = EVENTS
    z_score: float = Field(default=3.0, ge=0)
    L_override: Optional[float] = Field(default=None, ge=0)
    I_override: Optional[float] = Field(default=None, gt=0)
    T_block_override: Optional[int] = Field(default=None, ge=1)
    return_cutoff_override: Optional[int] = Field(default=None, ge=0)

    @field_validator('c')
    @classmethod
    def _c_fixed(cls, value: float) -> float:
        if value != 0.01:
            raise ValueError("c is fixed at 0.01")
        return value

    @field_validator('events')
    @classmethod
    def _known_events(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = set(value) - set(EVENTS)
        if unknown:
            raise ValueError(f"unknown typicality events: {sorted(unknown)}")
        return tuple(e for e in EVENTS if e in value)

    @model_validator(mode='after')
    def _ordered_band(self) -> 'TypicalityParams':
        if not self.k < self.K:
            raise ValueError(f"need k < K, got k={self.k}, K={self.K}")
        return self


class AlgorithmParams(BaseModel):
    """Round structure of the coarse-grained exploration."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    u: float = Field(default=0.0, ge=0)
    alpha: int = Field(default=3, ge=1)
    beta: int = Field(default=3, ge=1)
    k1: int = Field(default=8, ge=1)
    gamma: Optional[float] = Field(default=None, gt=0)
    q: Optional[float] = Field(default=None, ge=0, le=1)
    epsilon: float = Field(default=0.1, ge=0, lt=0.5)
    rejection_budget: int = Field(default=10_000, ge=1)
    population_cap: int = Field(default=1_000_000, ge=1)
    check_invariants: bool = True

    def resolved_gamma(self, M: float) -> float:
        """gamma = 2 alpha M + 2, checked against an explicit value."""
        expected = 2 * self.alpha * M + 2
        if self.gamma is not None and abs(self.gamma - expected) > 1e-9:
            raise ValueError(f"gamma must equal 2*alpha*M + 2 = {expected}, got {self.gamma}")
        return expected
