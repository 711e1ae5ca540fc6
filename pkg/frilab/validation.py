"""
Validation of experiment and sweep configurations.

Configurations are checked against the published JSON schemas first, then
materialized into the pydantic models, which add the cross-field rules
(k < K, a length law where one is needed, operands of capacity queries).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from jsonschema import Draft202012Validator
from pydantic import ValidationError

from .errors import ConfigValidationError
from .models.experiment import KIND_PARAMS, KINDS, ExperimentConfig, SweepConfig
from .models.params import AlgorithmParams, PotentialConfig, TypicalityParams

logger = logging.getLogger(__name__)

LAW_SCHEMA = {
    "oneOf": [
        {"type": "string", "pattern": r"^((geometric|geo):[0-9]+(\.[0-9]+)?|dirac:[0-9]+|\{.*)$"},
        {
            "type": "object",
            "properties": {
                "family": {"type": "string", "enum": ["geometric", "dirac", "pmf", "scaled", "size-biased"]},
                "params": {"type": "object"},
            },
            "required": ["family", "params"],
            "additionalProperties": False,
        },
    ]
}

EXPERIMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "frilab experiment",
    "type": "object",
    "properties": {
        "id": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "kind": {"type": "string", "enum": list(KINDS)},
        "d": {"type": "integer", "minimum": 4},
        "rho": LAW_SCHEMA,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "replicas": {"type": "integer", "minimum": 1},
        "params": {"type": "object"},
        "potential": {"type": "object"},
        "typicality": {"type": "object"},
        "algorithm": {"type": "object"},
        "output": {"type": "string"},
    },
    "required": ["id", "kind", "d"],
    "additionalProperties": False,
}

SWEEP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "frilab sweep",
    "type": "object",
    "properties": {
        "id": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "template": {"type": "object"},
        "grid": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {"type": "array", "minItems": 1},
        },
        "output": {"type": "string"},
    },
    "required": ["id", "template", "grid"],
    "additionalProperties": False,
}

SECTION_SCHEMAS = {
    'potential': PotentialConfig.model_json_schema(),
    'typicality': TypicalityParams.model_json_schema(),
    'algorithm': AlgorithmParams.model_json_schema(),
}

PARAMS_SCHEMAS = {kind: model.model_json_schema() for kind, model in KIND_PARAMS.items()}


@dataclass
class ValidationResult:
    """Outcome of validating a configuration."""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    config: Optional[Union[ExperimentConfig, SweepConfig]] = None

    def raise_for_errors(self, what: str = "experiment") -> Union[ExperimentConfig, SweepConfig]:
        if not self.is_valid:
            raise ConfigValidationError(f"invalid {what} configuration: {'; '.join(self.errors)}", self.errors)
        return self.config


def _path(prefix: str, parts) -> str:
    tail = '.'.join(str(p) for p in parts)
    if prefix and tail:
        return f"{prefix}.{tail}"
    return prefix or tail or '<root>'


def _schema_errors(schema: Dict[str, Any], data: Any, prefix: str = '') -> List[str]:
    validator = Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])
    return [f"{_path(prefix, e.absolute_path)}: {e.message}" for e in errors]


def _pydantic_errors(error: ValidationError) -> List[str]:
    return [f"{_path('', e['loc'])}: {e['msg']}" for e in error.errors()]


def validate_experiment(data: Dict[str, Any]) -> ValidationResult:
    """
    Validate an experiment configuration.

    Args:
        data: Parsed JSON configuration

    Returns:
        ValidationResult with the materialized ExperimentConfig when valid
    """
    errors = _schema_errors(EXPERIMENT_SCHEMA, data)
    if isinstance(data, dict):
        kind = data.get('kind')
        if kind in PARAMS_SCHEMAS and isinstance(data.get('params', {}), dict):
            errors += _schema_errors(PARAMS_SCHEMAS[kind], data.get('params', {}), 'params')
        for section, schema in SECTION_SCHEMAS.items():
            if isinstance(data.get(section), dict):
                errors += _schema_errors(schema, data[section], section)
    if errors:
        logger.debug(f"Experiment config failed schema validation: {errors}")
        return ValidationResult(False, errors)

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        return ValidationResult(False, _pydantic_errors(e))
    except ValueError as e:
        return ValidationResult(False, [str(e)])
    return ValidationResult(True, config=config)


def validate_sweep(data: Dict[str, Any]) -> ValidationResult:
    """
    Validate a sweep: its own schema, then every cell of the grid.

    Returns:
        ValidationResult with the SweepConfig when the sweep and all cells are valid
    """
    errors = _schema_errors(SWEEP_SCHEMA, data)
    if errors:
        return ValidationResult(False, errors)
    try:
        sweep = SweepConfig.model_validate(data)
    except ValidationError as e:
        return ValidationResult(False, _pydantic_errors(e))

    for index, values, cell in sweep.cells():
        result = validate_experiment(cell)
        if not result.is_valid:
            errors += [f"cell {index} {values}: {message}" for message in result.errors]
    if errors:
        return ValidationResult(False, errors)
    return ValidationResult(True, config=sweep)


def require_experiment(data: Dict[str, Any]) -> ExperimentConfig:
    """ExperimentConfig or ConfigValidationError."""
    return validate_experiment(data).raise_for_errors("experiment")


def require_sweep(data: Dict[str, Any]) -> SweepConfig:
    """SweepConfig or ConfigValidationError."""
    return validate_sweep(data).raise_for_errors("sweep")


def export_schema() -> Dict[str, Any]:
    """All published schemas, keyed by document."""
    return {
        'experiment': EXPERIMENT_SCHEMA,
        'params': PARAMS_SCHEMAS,
        'sections': SECTION_SCHEMAS,
        'sweep': SWEEP_SCHEMA,
    }
