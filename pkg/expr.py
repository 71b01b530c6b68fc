"""
Scalar expression language for metric entries, span components and
coefficient recipes.

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := ("-")? power
    power  := atom ("^" number)*          left-associative
    atom   := number | ident "(" expr ")" | ident | "(" expr ")"

Identifiers x1..x9 are chart coordinates, every other identifier is a
late-bound parameter. Evaluation is generic: the same tree evaluates on
floats, numpy arrays of points and jets.
"""

import re
from dataclasses import dataclass

import numpy as np
import pyparsing as pp

import jets
import settings
from errors import ExpressionSyntaxError, InputError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
_COORDINATE = re.compile(r"x[1-9]")
_ALLOWED = re.compile(r"[A-Za-z0-9_.\s+\-*/^()]")


# --- syntax tree ----------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Coordinate:
    index: int
    name: str


@dataclass(frozen=True)
class Parameter:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


# --- grammar --------------------------------------------------------------


def _identifier(s, loc, toks):
    name = toks[0]
    if name in FUNCTIONS:
        raise pp.ParseFatalException(s, loc, f"function {name!r} used without an argument")
    if _COORDINATE.fullmatch(name):
        return Coordinate(int(name[1]) - 1, name)
    return Parameter(name)


def _call(s, loc, toks):
    name, arg = toks[0], toks[1]
    if name not in FUNCTIONS:
        raise pp.ParseFatalException(s, loc, f"unknown function {name!r}")
    return Call(name, arg)


def _power(toks):
    node = toks[0]
    for exponent in toks[1:]:
        node = Binary("^", node, exponent)
    return node


def _factor(toks):
    if len(toks) == 2:
        return Unary("neg", toks[1])
    return toks[0]


def _fold(toks):
    node = toks[0]
    for i in range(1, len(toks), 2):
        node = Binary(toks[i], node, toks[i + 1])
    return node


def _build_grammar():
    number = pp.Regex(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
    number.set_parse_action(lambda t: Literal(float(t[0])))
    name = pp.Regex(r"[A-Za-z][A-Za-z0-9_]*")
    ident = pp.Regex(r"[A-Za-z][A-Za-z0-9_]*").set_parse_action(_identifier)
    lpar, rpar = pp.Suppress("("), pp.Suppress(")")

    expr = pp.Forward()
    call = (name + lpar - expr + rpar).set_parse_action(_call)
    group = lpar - expr + rpar
    atom = number | call | ident | group
    power = (atom + pp.ZeroOrMore(pp.Suppress("^") - number)).set_parse_action(_power)
    factor = (pp.Opt(pp.Literal("-")) + power).set_parse_action(_factor)
    term = (factor + pp.ZeroOrMore(pp.one_of("* /") - factor)).set_parse_action(_fold)
    expr <<= (term + pp.ZeroOrMore(pp.one_of("+ -") - term)).set_parse_action(_fold)
    return expr


_GRAMMAR = _build_grammar()


def _byte_offset(text, loc):
    return len(text[:loc].encode("utf-8"))


def parse(text):
    """Parse ``text`` into an immutable syntax tree."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", text or "", 0)
    for match in re.finditer(r".", text, flags=re.DOTALL):
        if not _ALLOWED.fullmatch(match.group()):
            raise ExpressionSyntaxError(f"unknown character {match.group()!r}", text, _byte_offset(text, match.start()))
    try:
        return _GRAMMAR.parse_string(text, parse_all=True)[0]
    except pp.ParseBaseException as exc:
        raise ExpressionSyntaxError(exc.msg, text, _byte_offset(text, exc.loc)) from None


# --- inventories ----------------------------------------------------------


def _walk(node):
    yield node
    if isinstance(node, Unary):
        yield from _walk(node.operand)
    elif isinstance(node, Binary):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Call):
        yield from _walk(node.arg)


def coordinates(node):
    return sorted({n.index for n in _walk(node) if isinstance(n, Coordinate)})


def parameters(node):
    return sorted({n.name for n in _walk(node) if isinstance(n, Parameter)})


def check_bindings(node, dim, params, where="expression"):
    """Validate that every coordinate fits the chart and every parameter is bound."""
    for index in coordinates(node):
        if index >= dim:
            raise InputError(f"{where}: coordinate x{index + 1} exceeds chart dimension {dim}")
    missing = [name for name in parameters(node) if name not in params]
    if missing:
        raise InputError(f"{where}: unbound parameter(s) {', '.join(missing)}")


# --- evaluation -----------------------------------------------------------


def _evaluate(node, coords, params):
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Coordinate):
        if node.index >= len(coords):
            raise InputError(f"coordinate {node.name} exceeds chart dimension {len(coords)}")
        return coords[node.index]
    if isinstance(node, Parameter):
        if node.name not in params:
            raise InputError(f"unbound parameter {node.name!r}")
        return params[node.name]
    if isinstance(node, Unary):
        return -_evaluate(node.operand, coords, params)
    if isinstance(node, Call):
        return jets.elementary(node.fn, _evaluate(node.arg, coords, params))
    left = _evaluate(node.left, coords, params)
    if node.op == "^":
        return jets.pow_const(left, node.right.value)
    right = _evaluate(node.right, coords, params)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return jets.divide(left, right)


def evaluate(node, point, params=None):
    """Real value at ``point`` (shape (m,)) or at a batch of points (shape (..., m))."""
    point = np.asarray(point, dtype=float)
    coords = [point[..., i] for i in range(point.shape[-1])]
    result = np.broadcast_to(np.asarray(_evaluate(node, coords, params or {}), dtype=float), point.shape[:-1])
    return float(result) if result.ndim == 0 else np.array(result)


def evaluate_jet(node, point, params=None, order=settings.JET_ORDER):
    point = np.asarray(point, dtype=float)
    coords = jets.seed_point(point, order)
    result = _evaluate(node, coords, params or {})
    if not isinstance(result, jets.Jet):
        value = np.broadcast_to(np.asarray(result, dtype=float), point.shape[:-1])
        return jets.Jet.constant(value, point.shape[-1], order)
    return result


def evaluate_bound(node, bindings):
    """Evaluate a coordinate-free expression whose parameters are floats, arrays or jets."""
    return _evaluate(node, [], bindings)


# --- printing -------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _precedence(node):
    if isinstance(node, Binary):
        return _PRECEDENCE[node.op]
    if isinstance(node, Unary):
        return _PRECEDENCE["neg"]
    return 5


def pretty(node):
    """Minimal-parenthesis rendering; parse(pretty(e)) == e."""
    if isinstance(node, Literal):
        return repr(float(node.value))
    if isinstance(node, (Coordinate, Parameter)):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({pretty(node.arg)})"
    if isinstance(node, Unary):
        inner = pretty(node.operand)
        return f"-({inner})" if _precedence(node.operand) < 4 else f"-{inner}"
    own = _PRECEDENCE[node.op]
    left = pretty(node.left)
    if _precedence(node.left) < own:
        left = f"({left})"
    right = pretty(node.right)
    if _precedence(node.right) <= own:
        right = f"({right})"
    if node.op == "^":
        return f"{left}^{right}"
    if node.op in "*/":
        return f"{left}{node.op}{right}"
    return f"{left} {node.op} {right}"
