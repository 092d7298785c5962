"""
Symbolic coefficient expressions for user-supplied models.

Expressions use +, -, *, /, ^ (or **), parentheses, numeric literals, the
constants pi and e, named model parameters, the variables x1..xn and y1..yd
and the functions listed in FUNCTIONS. Every identifier is checked against
that whitelist before sympy parses the text, so parse_expr only ever sees
names it was handed in its local namespace. Parsed expressions are
differentiated symbolically and lambdified to numpy.
"""

import re
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy.parsing.sympy_parser import auto_number, parse_expr
from tokenize import TokenError

from exceptions.model_exceptions import ExpressionSyntaxError


FUNCTIONS: Dict[str, Callable] = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
    "abs": sympy.Abs,
    "tanh": sympy.tanh,
    "sinh": sympy.sinh,
    "cosh": sympy.cosh,
    "atan": sympy.atan,
}

BINARY_FUNCTIONS: Dict[str, Callable] = {
    "min": sympy.Min,
    "max": sympy.Max,
}

CONSTANTS = {"pi": sympy.pi, "e": sympy.E}

_ALLOWED = re.compile(r"^[0-9A-Za-z_+\-*/^().,\s]*$")
_TOKEN = re.compile(r"\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|[A-Za-z_]\w*")
_VARIABLE = re.compile(r"^(x|y)([1-9][0-9]*)$")

_GLOBALS = {
    "__builtins__": {},
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
}


def _symbol(name: str) -> sympy.Symbol:
    return sympy.Symbol(name, real=True)


def _sort_key(name: str) -> Tuple[str, int]:
    match = _VARIABLE.match(name)
    return match.group(1), int(match.group(2))


class CompiledExpression:
    """A symbolic scalar expression evaluated on broadcastable (x, y) arrays"""

    def __init__(self, source: str, expression: sympy.Expr, n: int, d: int):
        self.source = source
        self.expression = expression
        self.n = n
        self.d = d
        self.variables = frozenset(str(symbol) for symbol in expression.free_symbols)
        ordered = sorted(self.variables, key=_sort_key)
        self._columns = [(name[0], int(name[1:]) - 1) for name in ordered]
        numeric = expression.rewrite(sympy.Piecewise)
        self._function = sympy.lambdify([_symbol(name) for name in ordered], numeric, modules="numpy")

    @property
    def depends_on_x(self) -> bool:
        return any(name.startswith("x") for name in self.variables)

    @property
    def depends_on_y(self) -> bool:
        return any(name.startswith("y") for name in self.variables)

    def derivative(self, name: str) -> "CompiledExpression":
        """Symbolic partial derivative with respect to x<i> or y<j>"""
        return CompiledExpression(f"d({self.source})/d{name}", sympy.diff(self.expression, _symbol(name)),
                                  self.n, self.d)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        arrays = {"x": x, "y": y}
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            value = self._function(*(arrays[kind][..., column] for kind, column in self._columns))
        return np.array(np.broadcast_to(np.asarray(value, dtype=float), shape))

    def __repr__(self):
        return f"CompiledExpression({self.source!r})"


def _unary(name: str, func: Callable, source: str) -> Callable:
    def call(*args):
        if len(args) != 1:
            raise ExpressionSyntaxError(f"{name} takes exactly one argument in expression {source!r}", source, name)
        return func(*args)
    return call


def _binary(name: str, func: Callable, source: str) -> Callable:
    def call(*args):
        if len(args) != 2:
            raise ExpressionSyntaxError(f"{name} takes exactly two arguments in expression {source!r}", source, name)
        return func(*args)
    return call


def _namespace(source: str, n: int, d: int, parameters: Dict[str, float], names: Iterable[str]) -> Dict[str, object]:
    namespace: Dict[str, object] = {}
    for name in names:
        match = _VARIABLE.match(name)
        if match:
            limit = n if match.group(1) == "x" else d
            if int(match.group(2)) > limit:
                raise ExpressionSyntaxError(
                    f"Variable {name} exceeds dimension {limit} in expression {source!r}", source, name
                )
            namespace[name] = _symbol(name)
        elif name in parameters:
            namespace[name] = sympy.Float(float(parameters[name]))
        elif name in FUNCTIONS:
            namespace[name] = _unary(name, FUNCTIONS[name], source)
        elif name in BINARY_FUNCTIONS:
            namespace[name] = _binary(name, BINARY_FUNCTIONS[name], source)
        elif name in CONSTANTS:
            namespace[name] = CONSTANTS[name]
        else:
            raise ExpressionSyntaxError(f"Unknown name in expression {source!r}", source, name)
    return namespace


def compile_expression(source, n: int, d: int, parameters: Optional[Dict[str, float]] = None) -> CompiledExpression:
    """Parse an expression string (or a bare number) into a symbolic expression and its numpy form"""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str) or not source.strip():
        raise ExpressionSyntaxError("Expression must be a non-empty string", str(source))
    if not _ALLOWED.match(source):
        raise ExpressionSyntaxError(f"Unsupported characters in expression {source!r}", source)
    names = {token for token in _TOKEN.findall(source) if not token[0].isdigit() and token[0] != "."}
    namespace = _namespace(source, n, d, dict(parameters or {}), names)
    try:
        parsed = parse_expr(source.replace("^", "**").strip(), local_dict=namespace,
                            global_dict=dict(_GLOBALS), transformations=(auto_number,))
    except ExpressionSyntaxError:
        raise
    except (SyntaxError, TokenError, TypeError, ValueError, AttributeError) as exc:
        raise ExpressionSyntaxError(f"Cannot parse expression {source!r}: {exc}", source)
    if not isinstance(parsed, sympy.Expr):
        raise ExpressionSyntaxError(f"Expression {source!r} is not a scalar", source)
    return CompiledExpression(source, parsed, n, d)


class ExpressionArray:
    """Vector- or matrix-valued coefficient assembled from scalar expressions"""

    def __init__(self, entries: List[CompiledExpression], shape: Sequence[int]):
        self.entries = entries
        self.shape = tuple(shape)

    @property
    def depends_on_x(self) -> bool:
        return any(entry.depends_on_x for entry in self.entries)

    def jacobian_x(self) -> "ExpressionArray":
        """Entry [..., j] is the derivative of the entry [...] with respect to x<j+1>"""
        n = self.entries[0].n
        derivatives = [entry.derivative(f"x{j + 1}") for entry in self.entries for j in range(n)]
        return ExpressionArray(derivatives, self.shape + (n,))

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        values = np.stack([entry(x, y) for entry in self.entries], axis=-1)
        return values.reshape(values.shape[:-1] + self.shape)

    def __repr__(self):
        return f"ExpressionArray({[entry.source for entry in self.entries]!r}, shape={self.shape})"


def compile_array(sources, shape: Sequence[int], n: int, d: int,
                  parameters: Optional[Dict[str, float]] = None) -> ExpressionArray:
    """Compile a scalar, a list or a list of rows into an array-valued coefficient"""
    flat = list(np.ravel(np.asarray(sources, dtype=object)))
    size = int(np.prod(shape))
    if len(flat) != size:
        raise ExpressionSyntaxError(
            f"Expected {size} expressions for shape {tuple(shape)}, got {len(flat)}", str(sources)
        )
    entries = [compile_expression(item, n, d, parameters) for item in flat]
    return ExpressionArray(entries, shape)
