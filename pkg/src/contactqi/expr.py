"""Scalar expressions over chart coordinates.

Expressions are immutable trees. They can be parsed from text, printed back,
evaluated (pointwise or vectorised over many points with numpy) and
differentiated symbolically.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | ident | '(' expr ')' | func '(' expr ')'

``^`` is right associative and binds tighter than unary minus, so ``-y^2``
is ``-(y^2)`` while ``2^-1`` is ``2^(-1)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Neg", "Func", "BinOp",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "DomainError",
    "parse", "evaluate", "differentiate", "simplify", "to_text",
    "variables_of", "FUNCTIONS",
]

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text = text
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class DomainError(ExprError):
    pass


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)

    def __call__(self, point):
        return evaluate(self, point)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    index: int


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Func(Expr):
    name: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    stripped_end = len(text.rstrip())
    while pos < stripped_end:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.vars = {name: k for k, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self.text, pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", self.text, pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            if val in self.vars:
                return Var(val, self.vars[val])
            if val == "pi":
                return Const(math.pi)
            raise UnknownIdentifierError(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", self.text, pos)


def parse(text: str, variables: Sequence[str]) -> Expr:
    """Parse ``text`` into an expression over the coordinates ``variables``.

    >>> evaluate(parse("(y^2+1)/4", ["x", "y", "z"]), (0, 2, 0))
    1.25
    """
    return _Parser(text, variables).parse()


def variables_of(e: Expr) -> set[Var]:
    if isinstance(e, Var):
        return {e}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Func)):
        return variables_of(e.arg)
    return variables_of(e.left) | variables_of(e.right)


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def format_number(value: float) -> str:
    if value == math.pi:
        return "pi"
    if math.isfinite(value) and value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    if isinstance(e, Const) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(e: Expr, needs_parens: bool) -> str:
    s = to_text(e)
    return f"({s})" if needs_parens else s


def to_text(e: Expr) -> str:
    """Print an expression so that ``parse`` rebuilds the same tree."""
    if isinstance(e, Const):
        if math.copysign(1.0, e.value) < 0:
            return "-" + format_number(-e.value)
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _prec(e.arg) < _PREC["neg"])
    p = _PREC[e.op]
    if e.op == "^":
        left = _wrap(e.left, _prec(e.left) < _PREC["atom"])
        right = _wrap(e.right, _prec(e.right) < _PREC["neg"])
        return f"{left}^{right}"
    left = _wrap(e.left, _prec(e.left) < p)
    right = _wrap(e.right, _prec(e.right) <= p)
    if e.op in "+-":
        return f"{left} {e.op} {right}"
    return f"{left}{e.op}{right}"


# ---------------------------------------------------------------------------
# Evaluation

Number = Union[float, np.ndarray]


def _first_bad(points: np.ndarray, mask) -> str:
    if np.ndim(mask) == 0 or points.ndim == 1:
        return str(tuple(float(c) for c in np.atleast_1d(points)))
    idx = int(np.flatnonzero(np.broadcast_to(mask, points.shape[:-1]))[0])
    return str(tuple(float(c) for c in points[idx]))


def evaluate(e: Expr, point) -> Number:
    """Evaluate at one point (returns float) or at an (N, dim) array of points.

    Raises ``DomainError`` on division by zero, log or sqrt out of domain,
    non-integer powers of negative numbers and non-finite results.
    """
    pts = np.asarray(point, dtype=float)
    if pts.ndim not in (1, 2):
        raise ValueError("point must be a coordinate vector or an (N, dim) array")
    needed = max((v.index for v in variables_of(e)), default=-1) + 1
    if pts.shape[-1] < needed:
        raise ValueError(f"point has {pts.shape[-1]} coordinates, expression needs {needed}")
    with np.errstate(all="ignore"):
        value = _eval(e, pts)
    if pts.ndim == 1:
        return float(value)
    return np.broadcast_to(value, pts.shape[:-1]).astype(float, copy=True)


def _eval(e: Expr, pts: np.ndarray) -> Number:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return pts[..., e.index]
    if isinstance(e, Neg):
        return -_eval(e.arg, pts)
    if isinstance(e, Func):
        a = _eval(e.arg, pts)
        if e.name == "sqrt":
            bad = np.less(a, 0)
            if np.any(bad):
                raise DomainError(f"sqrt of negative number at {_first_bad(pts, bad)}")
            return np.sqrt(a)
        if e.name == "log":
            bad = np.less_equal(a, 0)
            if np.any(bad):
                raise DomainError(f"log of nonpositive number at {_first_bad(pts, bad)}")
            return np.log(a)
        if e.name == "exp":
            out = np.exp(a)
            bad = ~np.isfinite(out)
            if np.any(bad):
                raise DomainError(f"exp overflow at {_first_bad(pts, bad)}")
            return out
        return np.sin(a) if e.name == "sin" else np.cos(a)
    a = _eval(e.left, pts)
    b = _eval(e.right, pts)
    if e.op == "+":
        out = a + b
    elif e.op == "-":
        out = a - b
    elif e.op == "*":
        out = a * b
    elif e.op == "/":
        bad = np.equal(b, 0)
        if np.any(bad):
            raise DomainError(f"division by zero at {_first_bad(pts, bad)}")
        out = a / b
    else:
        noninteger = np.not_equal(np.floor(b), b)
        bad = np.less(a, 0) & noninteger
        if np.any(bad):
            raise DomainError(f"non-integer power of negative base at {_first_bad(pts, bad)}")
        bad = np.equal(a, 0) & np.less(b, 0)
        if np.any(bad):
            raise DomainError(f"zero raised to negative power at {_first_bad(pts, bad)}")
        out = np.power(a, b)
    bad = ~np.isfinite(out)
    if np.any(bad):
        raise DomainError(f"non-finite result of {e.op!r} at {_first_bad(pts, bad)}")
    return out


# ---------------------------------------------------------------------------
# Construction helpers with light simplification


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold(e: Expr) -> Expr:
    """Replace ``e`` by a constant when it has no variables and evaluates cleanly."""
    try:
        with np.errstate(all="ignore"):
            value = float(_eval(e, np.zeros(0)))
    except DomainError:
        return e
    return Const(value) if math.isfinite(value) else e


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    e = BinOp("+", a, b)
    return _fold(e) if _is_const(a) and _is_const(b) else e


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    e = BinOp("-", a, b)
    return _fold(e) if _is_const(a) and _is_const(b) else e


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    e = BinOp("*", a, b)
    return _fold(e) if _is_const(a) and _is_const(b) else e


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    e = BinOp("/", a, b)
    return _fold(e) if _is_const(a) and _is_const(b) else e


def power(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return ONE
    e = BinOp("^", a, b)
    return _fold(e) if _is_const(a) and _is_const(b) else e


def neg(a: Expr) -> Expr:
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, Const):
        return Const(-a.value) if a.value != 0 else ZERO
    return Neg(a)


def func(name: str, a: Expr) -> Expr:
    e = Func(name, a)
    return _fold(e) if _is_const(a) else e


def simplify(e: Expr) -> Expr:
    """Apply the fixed rule set (x*0, x*1, x+0, constant folding) bottom-up."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Func):
        return func(e.name, simplify(e.arg))
    left, right = simplify(e.left), simplify(e.right)
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[e.op](left, right)


# ---------------------------------------------------------------------------
# Differentiation


def _depends_on(e: Expr, name: str) -> bool:
    return any(v.name == name for v in variables_of(e))


def differentiate(e: Expr, var: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the coordinate ``var``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if not _depends_on(e, var):
        return ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, Func):
        u = e.arg
        du = differentiate(u, var)
        if e.name == "sqrt":
            outer = div(ONE, mul(Const(2.0), e))
        elif e.name == "sin":
            outer = func("cos", u)
        elif e.name == "cos":
            outer = neg(func("sin", u))
        elif e.name == "exp":
            outer = e
        else:
            outer = div(ONE, u)
        return mul(outer, du)
    u, v = e.left, e.right
    du, dv = differentiate(u, var), differentiate(v, var)
    if e.op == "+":
        return add(du, dv)
    if e.op == "-":
        return sub(du, dv)
    if e.op == "*":
        return add(mul(du, v), mul(u, dv))
    if e.op == "/":
        return div(sub(mul(du, v), mul(u, dv)), power(v, Const(2.0)))
    if not _depends_on(v, var):
        # power rule; v is constant in var
        return mul(mul(v, power(u, simplify(sub(v, ONE)))), du)
    # u^v = exp(v log u): requires u > 0 where the exponent varies
    return mul(e, add(mul(dv, func("log", u)), div(mul(v, du), u)))
