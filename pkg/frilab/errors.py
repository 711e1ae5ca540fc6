"""
Exception hierarchy for frilab.

Every error that can end an experiment carries the process exit code the CLI
reports and a JSON-serializable record written next to the results.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class SamplerDiagnostic:
    """A flagged sampling event (e.g. a rejection budget running out)."""
    sampler: str
    reason: str
    hit_point: Optional[List[int]] = None
    attempts: int = 0
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class FrilabError(Exception):
    """Base class for all frilab failures."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str, diagnostics: Optional[List[SamplerDiagnostic]] = None,
                 partial: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.diagnostics = list(diagnostics or [])
        self.partial = partial

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable error record."""
        record = {
            'error': self.kind,
            'message': self.message,
            'exit_code': self.exit_code,
            'diagnostics': [d.to_dict() for d in self.diagnostics],
        }
        if self.partial is not None:
            record['partial'] = self.partial
        return record


class ConfigValidationError(FrilabError, ValueError):
    exit_code = 2
    kind = "validation"

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = list(errors or [])

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record['errors'] = self.errors
        return record


class BudgetExhaustedError(FrilabError):
    exit_code = 3
    kind = "budget"


class MemoryCapError(BudgetExhaustedError):
    kind = "memory"


class InvariantViolation(FrilabError, AssertionError):
    exit_code = 4
    kind = "invariant"
