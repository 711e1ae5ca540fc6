"""
Experiment descriptions.

An experiment is fully determined by its configuration and seed. The
`params` section is kind-specific and parsed into one of the models below.
"""

import copy
import itertools
from typing import Any, Dict, Iterator, List, Literal, Optional, Tuple, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..lattice.points import Box, PointSet, origin, unit_vector
from ..lattice.rng import RngStream, derive_seed
from ..laws.length_law import LengthDistribution, from_spec, parse_shorthand
from .params import AlgorithmParams, PotentialConfig, TypicalityParams

KINDS = ('capacity', 'fri-sample', 'threshold', 'explore', 'algorithm', 'chain', 'epsilon', 'omega', 'branching')
ExperimentKind = Literal['capacity', 'fri-sample', 'threshold', 'explore', 'algorithm', 'chain', 'epsilon',
                         'omega', 'branching']

LAWLESS_KINDS = ('epsilon', 'omega')
RHO_QUANTITIES = ('rho_capacity', 'rho_capacity_upper_bound', 'kappa', 'phi')


class _Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class SetSpec(_Params):
    """A finite test set: l-infinity ball, axis segment, explicit points or the origin."""
    shape: Literal['ball', 'segment', 'points', 'origin'] = 'ball'
    radius: int = Field(default=1, ge=0)
    points: Optional[List[List[int]]] = None

    @model_validator(mode='after')
    def _points_given(self) -> 'SetSpec':
        if self.shape == 'points' and not self.points:
            raise ValueError("shape 'points' needs a nonempty points list")
        return self

    def build(self, d: int) -> PointSet:
        if self.shape == 'origin':
            return PointSet.from_points([origin(d)], d)
        if self.shape == 'ball':
            return PointSet.from_points(Box.centered(origin(d), self.radius).points(), d)
        if self.shape == 'segment':
            e1 = np.array(unit_vector(d, 0), dtype=np.int64)
            return PointSet.from_points(np.arange(self.radius + 1)[:, None] * e1[None, :], d)
        if any(len(p) != d for p in self.points):
            raise ValueError(f"every point must have {d} coordinates")
        return PointSet.from_points(self.points, d)


class CapacityParams(_Params):
    quantity: Literal['capacity', 'truncated_capacity', 'rho_capacity', 'rho_capacity_upper_bound', 'kappa',
                      'hitting_probability', 'green', 'phi'] = 'capacity'
    set: SetSpec = SetSpec()
    other: Optional[SetSpec] = None
    x: Optional[List[int]] = None
    y: Optional[List[int]] = None
    cutoff_steps: Optional[int] = Field(default=None, ge=1)
    kappa_method: Literal['direct', 'size-biased'] = 'direct'
    decomposed: bool = False

    @model_validator(mode='after')
    def _operands(self) -> 'CapacityParams':
        if self.quantity in ('hitting_probability', 'green') and self.x is None:
            raise ValueError(f"{self.quantity} needs the point x")
        if self.quantity == 'green' and self.y is None:
            raise ValueError("green needs the point y")
        if self.quantity == 'phi' and self.other is None:
            raise ValueError("phi needs the second set 'other'")
        if self.quantity in ('truncated_capacity', 'rho_capacity_upper_bound') and self.cutoff_steps is None:
            raise ValueError(f"{self.quantity} needs cutoff_steps")
        return self


class FriSampleParams(_Params):
    u: float = Field(ge=0)
    window: int = Field(default=8, ge=1)
    margin: Optional[int] = Field(default=None, ge=0)
    interior: Optional[int] = Field(default=None, ge=0)
    dump: bool = False


class ThresholdParams(_Params):
    L: int = Field(default=16, ge=8)
    target: float = Field(default=0.5, ge=0, lt=1)
    epsilon_d: Optional[float] = Field(default=None, gt=0)
    us: Optional[List[float]] = Field(default=None, min_length=1)
    margin: Optional[int] = Field(default=None, ge=0)


class ExploreParams(_Params):
    u: float = Field(ge=0)
    max_layers: int = Field(default=8, ge=1)
    mode: Literal['layers', 'coupled', 'recursion'] = 'layers'
    kappa: bool = True


class AlgorithmRunParams(_Params):
    window_radius: int = Field(default=2, ge=1)
    epsilon_d: Optional[float] = Field(default=None, gt=0)


class ChainParams(_Params):
    alpha: int = Field(default=3, ge=1)
    variant: Literal['full', 'diamond', 'square', 'direct'] = 'full'
    n: int = Field(default=100, ge=1)
    axis: int = Field(default=0, ge=0)
    epsilon_d: Optional[float] = Field(default=None, gt=0)
    start_budget: int = Field(default=1000, ge=1)


class EpsilonParams(_Params):
    T: int = Field(ge=1000)


class OmegaParams(_Params):
    q: float = Field(ge=0, le=1)
    gamma: float = Field(gt=0)
    radius: int = Field(default=8, ge=1)
    n_sites: int = Field(default=100_000, ge=1)


class BranchingParams(_Params):
    u: float = Field(ge=0)
    generations: int = Field(default=3, ge=1)
    seed_size: int = Field(default=1, ge=1)
    epsilon: Optional[float] = Field(default=None, ge=0, lt=0.5)
    epsilon_d: Optional[float] = Field(default=None, gt=0)
    start_budget: int = Field(default=1000, ge=1)


KIND_PARAMS: Dict[str, Type[_Params]] = {
    'capacity': CapacityParams,
    'fri-sample': FriSampleParams,
    'threshold': ThresholdParams,
    'explore': ExploreParams,
    'algorithm': AlgorithmRunParams,
    'chain': ChainParams,
    'epsilon': EpsilonParams,
    'omega': OmegaParams,
    'branching': BranchingParams,
}


def parse_law(spec: Union[str, Dict[str, Any]]) -> LengthDistribution:
    """Length law from a JSON spec or a shorthand string."""
    if isinstance(spec, str):
        return parse_shorthand(spec)
    return from_spec(spec)


class ExperimentConfig(BaseModel):
    """One experiment: kind, dimension, length law, parameters, replicas and seed."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    id: str = Field(pattern=r'^[A-Za-z0-9_.-]+$')
    kind: ExperimentKind
    d: int = Field(ge=4)
    rho: Optional[Union[str, Dict[str, Any]]] = None
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    replicas: int = Field(default=1, ge=1)
    params: Dict[str, Any] = Field(default_factory=dict)
    potential: PotentialConfig = PotentialConfig()
    typicality: TypicalityParams = TypicalityParams()
    algorithm: AlgorithmParams = AlgorithmParams()
    output: Optional[str] = None

    @model_validator(mode='after')
    def _consistent(self) -> 'ExperimentConfig':
        kind_params = self.kind_params()
        if self.rho is None and self.kind not in LAWLESS_KINDS:
            if not (self.kind == 'capacity' and kind_params.quantity not in RHO_QUANTITIES):
                raise ValueError(f"experiment kind {self.kind!r} needs a length law 'rho'")
        if self.rho is not None:
            parse_law(self.rho)
        if self.kind == 'epsilon' and self.replicas < 2:
            raise ValueError("epsilon experiments need at least 2 replicas")
        return self

    def kind_params(self) -> _Params:
        return KIND_PARAMS[self.kind].model_validate(self.params)

    def law(self) -> LengthDistribution:
        if self.rho is None:
            raise ValueError(f"experiment {self.id!r} has no length law")
        return parse_law(self.rho)

    def stream(self) -> RngStream:
        """Root stream of the experiment: the seed and the experiment id."""
        return RngStream(self.seed).child('experiment', self.id)

    def echo(self) -> Dict[str, Any]:
        """Parameters repeated on every result row."""
        echo: Dict[str, Any] = {'d': self.d}
        if self.rho is not None:
            echo['rho'] = self.law().to_spec()
        echo.update(self.kind_params().model_dump(exclude_none=True))
        return echo


def set_dotted(data: Dict[str, Any], path: str, value: Any) -> None:
    """Assign `value` at a dotted path such as "params.u", creating sections."""
    keys = path.split('.')
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot descend into {key!r} while setting {path!r}")
    node[keys[-1]] = value


class SweepConfig(BaseModel):
    """A template experiment and a grid of dotted-path overrides."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    id: str = Field(pattern=r'^[A-Za-z0-9_.-]+$')
    template: Dict[str, Any]
    grid: Dict[str, List[Any]] = Field(min_length=1)
    output: Optional[str] = None

    @model_validator(mode='after')
    def _nonempty_axes(self) -> 'SweepConfig':
        empty = [key for key, values in self.grid.items() if not values]
        if empty:
            raise ValueError(f"grid axes without values: {empty}")
        for key in self.grid:
            if key in ('id', 'seed'):
                raise ValueError(f"grid cannot vary {key!r}")
        return self

    @property
    def n_cells(self) -> int:
        n = 1
        for values in self.grid.values():
            n *= len(values)
        return n

    def cells(self) -> Iterator[Tuple[int, Dict[str, Any], Dict[str, Any]]]:
        """
        Cross product of the grid in axis order.

        Yields:
            (cell index, {axis: value}, raw experiment dict with a derived id and seed)
        """
        axes = list(self.grid)
        root_seed = int(self.template.get('seed', 0))
        base_id = self.template.get('id', self.id)
        for index, values in enumerate(itertools.product(*(self.grid[a] for a in axes))):
            data = copy.deepcopy(self.template)
            for axis, value in zip(axes, values):
                set_dotted(data, axis, value)
            data['id'] = f"{base_id}-cell{index:04d}"
            data['seed'] = derive_seed(root_seed, 'cell', index)
            yield index, dict(zip(axes, values)), data
