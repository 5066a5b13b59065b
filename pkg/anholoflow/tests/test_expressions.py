"""
Tests for user-supplied field expressions.
"""

import numpy as np
import pytest

from anholoflow.errors import ConfigError
from anholoflow.expressions import compile_expression, evaluate


def test_evaluate_on_arrays():
    """Expressions broadcast over coordinate arrays."""
    x1 = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(evaluate('t + 0.1*sin(pi*x1)', x1=x1, t=2.0),
                               2.0 + 0.1 * np.sin(np.pi * x1))


def test_numbers_are_constant_expressions():
    """A bare number is accepted and broadcast."""
    expr = compile_expression(0.5)
    assert expr.variables == ()
    np.testing.assert_array_equal(expr.evaluate(x1=np.zeros(3)), np.full(3, 0.5))


def test_used_variables_are_recorded():
    """Only the variables that occur are required."""
    expr = compile_expression('x1*exp(-t)')
    assert expr.variables == ('x1', 't')
    with pytest.raises(ConfigError):
        expr.evaluate(x1=1.0)


@pytest.mark.parametrize('text', [
    '__import__("os")',
    'x1.real',
    'z + 1',
    'x1 if t else 0',
    'x1 // 2',
    'sin(x=1)',
    '',
    'x1 +',
    '1j*x1',
    'x1(2)',
    'sin',
    '"x1"',
])
def test_unsafe_or_invalid_expressions(text):
    """Attribute access, unknown names and other constructs are rejected."""
    with pytest.raises(ConfigError):
        compile_expression(text)


def test_expressions_are_sympy_formulas():
    """The parsed formula is symbolic and its numpy form matches direct evaluation."""
    expr = compile_expression('pow(x1, 2) + sqrt(abs(t))*e - log(exp(y4))')
    assert expr.variables == ('x1', 't', 'y4')
    assert {s.name for s in expr.expr.free_symbols} == {'x1', 't', 'y4'}
    x1 = np.linspace(-1.0, 1.0, 4)
    np.testing.assert_allclose(expr(x1=x1, t=-4.0, y4=0.25),
                               x1 ** 2 + 2.0 * np.e - 0.25)


def test_cancelled_variables_are_not_required():
    """A variable that cancels symbolically is not needed for evaluation."""
    expr = compile_expression('x1 - x1 + 2')
    assert expr.variables == ()
    np.testing.assert_array_equal(expr.evaluate(t=np.zeros(2)), np.full(2, 2.0))
