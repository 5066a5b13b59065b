"""
Safe arithmetic expressions for user-supplied fields.

Run files describe free functions (phi0, boundary data, initial data,
Lagrangians) as short formulas such as ``"t + 0.1*sin(x1)"``. The text is
screened token by token, parsed by sympy against a fixed namespace and turned
into a numpy callable with ``lambdify``. Only numbers, the coordinate
variables, ``+ - * / **``, parentheses and a fixed set of functions are
accepted; everything else is a :class:`ConfigError`.
"""

import io
import tokenize
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Tuple

import numpy as np
import sympy as sym
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr

from .errors import ConfigError

VARIABLES: Tuple[str, ...] = ('x1', 'x2', 't', 'y4')

FUNCTIONS = {
    'exp': sym.exp,
    'log': sym.log,
    'sin': sym.sin,
    'cos': sym.cos,
    'abs': sym.Abs,
    'pow': sym.Pow,
    'sqrt': sym.sqrt,
    'tanh': sym.tanh,
}

CONSTANTS = {'pi': sym.pi, 'e': sym.E}

_OPERATORS = frozenset({'+', '-', '*', '/', '**', '(', ')', ','})
_SKIPPED = frozenset({tokenize.NEWLINE, tokenize.NL, tokenize.ENDMARKER})


@dataclass(frozen=True)
class Expression:
    """A validated expression ready for evaluation on coordinate arrays."""

    text: str
    expr: sym.Expr
    variables: Tuple[str, ...]
    func: Callable = field(repr=False, compare=False)

    def __call__(self, **coords: np.ndarray) -> np.ndarray:
        return self.evaluate(**coords)

    def evaluate(self, **coords: np.ndarray) -> np.ndarray:
        """Evaluate on coordinate arrays; the result has their broadcast shape."""
        missing = [name for name in self.variables if name not in coords]
        if missing:
            raise ConfigError(f"Expression '{self.text}' needs values for {missing}")
        arrays = {k: np.asarray(v, dtype=float) for k, v in coords.items()}
        shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
        with np.errstate(all='ignore'):
            value = self.func(*(arrays[name] for name in self.variables))
        return np.array(np.broadcast_to(np.asarray(value, dtype=float), shape))


def compile_expression(text, allowed: Iterable[str] = VARIABLES) -> Expression:
    """Parse and validate ``text``; numbers are accepted as constant expressions."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"Empty or non-string expression: {text!r}")
    text = text.strip()
    allowed = tuple(allowed)
    _screen(text, allowed)
    symbols = {name: sym.Symbol(name, real=True) for name in allowed}
    namespace: Dict[str, object] = {**FUNCTIONS, **CONSTANTS, **symbols}
    try:
        expr = sym.sympify(parse_expr(text, local_dict=namespace,
                                      global_dict={'__builtins__': {}}, transformations=()))
    except Exception as e:
        raise ConfigError(f"Cannot parse expression '{text}': {e}") from e
    if not isinstance(expr, sym.Expr) or expr.atoms(AppliedUndef):
        raise ConfigError(f"Expression '{text}' is not a scalar formula")
    variables = tuple(name for name in allowed if symbols[name] in expr.free_symbols)
    func = sym.lambdify([symbols[name] for name in variables], expr, 'numpy')
    return Expression(text=text, expr=expr, variables=variables, func=func)


def evaluate(text, **coords: np.ndarray) -> np.ndarray:
    """Compile ``text`` against the supplied coordinate names and evaluate it."""
    return compile_expression(text, allowed=tuple(coords)).evaluate(**coords)


def _screen(text: str, allowed: Tuple[str, ...]) -> None:
    try:
        tokens = list(tokenize.generate_tokens(io.StringIO(text).readline))
    except (tokenize.TokenError, SyntaxError) as e:
        raise ConfigError(f"Cannot parse expression '{text}': {e}") from e
    for tok in tokens:
        if tok.type in _SKIPPED:
            continue
        if tok.type == tokenize.NUMBER:
            if tok.string[-1] in 'jJ':
                raise ConfigError(f"Complex literal '{tok.string}' not allowed in '{text}'")
            continue
        if tok.type == tokenize.OP:
            if tok.string not in _OPERATORS:
                raise ConfigError(f"Operator '{tok.string}' not allowed in '{text}'")
            continue
        if tok.type == tokenize.NAME:
            if tok.string in FUNCTIONS or tok.string in CONSTANTS or tok.string in allowed:
                continue
            raise ConfigError(f"Unknown name '{tok.string}' in '{text}' "
                              f"(allowed: {', '.join(allowed)})")
        raise ConfigError(f"Token '{tok.string}' not allowed in '{text}'")
