"""
Tests for the error types and the exit-code mapping.
"""

from anholoflow.errors import (ConfigError, ConvergenceError, DegenerateMetricError, ErrorSeverity,
                               ErrorType, ExitCode, IntegrityError, NumericalError,
                               create_default_error_handler)


def test_exit_codes():
    """Config, numeric and integrity failures map to 2, 3 and 4."""
    handler = create_default_error_handler()
    assert handler.handle(ConfigError("bad key"), 'flow') == ExitCode.CONFIG == 2
    assert handler.handle(DegenerateMetricError("det 0"), 'flow') == ExitCode.NUMERIC == 3
    assert handler.handle(IntegrityError("sha"), 'report') == ExitCode.INTEGRITY == 4


def test_unexpected_exceptions_are_numeric():
    """Anything outside the toolkit hierarchy is a critical numeric failure."""
    handler = create_default_error_handler()
    assert handler.handle(ZeroDivisionError("x"), 'spde') == ExitCode.NUMERIC
    context = handler.history[-1]
    assert context.severity == ErrorSeverity.CRITICAL
    assert context.details == {'exception': 'ZeroDivisionError'}


def test_statistics_count_by_type():
    """The handler keeps per-type counts and the last failure."""
    handler = create_default_error_handler()
    handler.handle(ConvergenceError("newton", details={'iterations': 50}), 'spde')
    handler.handle(ConvergenceError("lanczos"), 'spde')
    handler.handle(ConfigError("lambda"), 'gen-metric')
    stats = handler.get_statistics()
    assert stats['total_errors'] == 3
    assert stats['by_type'] == {ErrorType.CONVERGENCE_ERROR.value: 2,
                                ErrorType.CONFIG_ERROR.value: 1}
    assert stats['last_error']['command'] == 'gen-metric'
    assert handler.history[0].details == {'iterations': 50}
    assert handler.history[0].error_id == 'spde-0001'


def test_hierarchy():
    """Numerical gates share one base class."""
    assert issubclass(DegenerateMetricError, NumericalError)
    assert issubclass(ConvergenceError, NumericalError)
    assert not issubclass(ConfigError, NumericalError)
