"""
Error types and exit-code mapping for anholoflow.

Numerical gates raise one of the exceptions below; the command layer hands any
failure to an :class:`ErrorHandler`, which logs it, keeps statistics and maps it
to the stable process exit code.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Severity of a failure."""
    CRITICAL = 1      # unexpected failure, run aborted
    HIGH = 2          # invariant breach, run aborted
    MEDIUM = 3        # path-level failure inside an ensemble
    LOW = 4           # recorded breach, run continues
    INFO = 5


class ErrorType(Enum):
    """Failure categories."""
    CONFIG_ERROR = "config_error"
    NUMERICAL_ERROR = "numerical_error"
    DEGENERACY_ERROR = "degeneracy_error"
    CONVERGENCE_ERROR = "convergence_error"
    CHART_ERROR = "chart_error"
    INTEGRITY_ERROR = "integrity_error"
    UNKNOWN_ERROR = "unknown_error"


class ExitCode(IntEnum):
    """Process exit codes of the command-line front end."""
    OK = 0
    CONFIG = 2
    NUMERIC = 3
    INTEGRITY = 4


class AnholoflowError(Exception):
    """Base class of all toolkit errors."""

    error_type = ErrorType.UNKNOWN_ERROR
    severity = ErrorSeverity.HIGH
    exit_code = ExitCode.NUMERIC

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigError(AnholoflowError):
    """Invalid run configuration or generating data."""
    error_type = ErrorType.CONFIG_ERROR
    exit_code = ExitCode.CONFIG


class NumericalError(AnholoflowError):
    """A numerical gate failed."""
    error_type = ErrorType.NUMERICAL_ERROR


class DegenerateMetricError(NumericalError):
    """A metric block, h3*h4 or a Hessian is degenerate."""
    error_type = ErrorType.DEGENERACY_ERROR


class GeneratingFunctionError(NumericalError):
    """|d phi / dt| fell below the admissible bound."""
    error_type = ErrorType.DEGENERACY_ERROR


class ConvergenceError(NumericalError):
    """An iterative solver did not converge within its budget."""
    error_type = ErrorType.CONVERGENCE_ERROR


class FlowBreakdownError(NumericalError):
    """A flow step left the admissible region."""


class NonEllipticError(NumericalError):
    """An elliptic solve was requested on a Lorentz-flagged metric."""


class ChartMismatchError(NumericalError):
    """Fields, axes or connections do not belong to a common chart."""
    error_type = ErrorType.CHART_ERROR


class IntegrityError(AnholoflowError):
    """A run directory failed verification."""
    error_type = ErrorType.INTEGRITY_ERROR
    exit_code = ExitCode.INTEGRITY


@dataclass
class ErrorContext:
    """One recorded failure."""

    error_id: str
    timestamp: datetime = field(default_factory=datetime.now)
    severity: ErrorSeverity = ErrorSeverity.HIGH
    error_type: ErrorType = ErrorType.UNKNOWN_ERROR
    message: str = ""
    details: Dict[str, Any] = field(default_factory=dict)
    command: Optional[str] = None
    path_index: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error_id': self.error_id,
            'timestamp': self.timestamp.isoformat(),
            'severity': self.severity.name,
            'error_type': self.error_type.value,
            'message': self.message,
            'details': self.details,
            'command': self.command,
            'path_index': self.path_index,
        }


class ErrorHandler:
    """Maps failures to exit codes and keeps per-type statistics."""

    def __init__(self):
        self.history: List[ErrorContext] = []
        self.stats: Dict[str, int] = {t.value: 0 for t in ErrorType}

    def context_for(self, exc: BaseException, command: Optional[str] = None,
                    path_index: Optional[int] = None) -> ErrorContext:
        """Build the context record of an exception."""
        if isinstance(exc, AnholoflowError):
            error_type, severity = exc.error_type, exc.severity
            details = dict(exc.details)
        else:
            error_type, severity = ErrorType.UNKNOWN_ERROR, ErrorSeverity.CRITICAL
            details = {'exception': type(exc).__name__}
        return ErrorContext(
            error_id=f"{command or 'run'}-{len(self.history) + 1:04d}",
            severity=severity,
            error_type=error_type,
            message=str(exc),
            details=details,
            command=command,
            path_index=path_index,
        )

    def record(self, context: ErrorContext) -> None:
        self.history.append(context)
        self.stats[context.error_type.value] += 1

    def handle(self, exc: BaseException, command: Optional[str] = None) -> ExitCode:
        """Log and record a failure; return the exit code for it."""
        context = self.context_for(exc, command)
        self.record(context)
        code = exc.exit_code if isinstance(exc, AnholoflowError) else ExitCode.NUMERIC
        if context.severity == ErrorSeverity.CRITICAL:
            logger.exception(f"Unexpected failure in {command}: {exc}")
        else:
            logger.error(f"{command} failed ({context.error_type.value}): {exc}")
        return code

    def get_statistics(self) -> Dict[str, Any]:
        return {
            'total_errors': len(self.history),
            'by_type': {k: v for k, v in self.stats.items() if v},
            'last_error': self.history[-1].to_dict() if self.history else None,
        }


def create_default_error_handler() -> ErrorHandler:
    """Error handler used by the command-line front end."""
    return ErrorHandler()
