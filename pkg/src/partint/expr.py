"""Scalar-field expressions over named phase-space coordinates.

Grammar (``^`` is right-associative and binds tighter than unary minus,
so ``-x^2`` is ``-(x^2)`` while ``2^-1`` is ``2^(-1)``)::

    expr    := term  (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" unary)?
    primary := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "abs"

Every ``NAME`` must be a chart coordinate or a declared parameter.
Expressions evaluate with floats, :class:`~partint.dual.Dual` numbers
(gradients) or :class:`~partint.dual.HyperDual` numbers (second
directional derivatives).
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dual import Dual, HyperDual, apply, is_active, value_of

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Malformed expression text; ``offset`` is the 1-based byte column."""

    def __init__(self, message: str, offset: int, text: str):
        super().__init__(f"{message} at offset {offset}: {text!r}")
        self.offset = offset
        self.text = text


class UnknownIdentifierError(ExprError):
    def __init__(self, names: Sequence[str]):
        super().__init__("unknown identifier(s): " + ", ".join(names))
        self.names = tuple(names)


class NameCollisionError(ExprError):
    pass


class UnboundNameError(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain of an operation."""

    def __init__(self, message: str, node: "Node"):
        self.subexpression = unparse_node(node)
        super().__init__(f"{message} in {self.subexpression}")
        self.node = node


class AbsKinkWarning(RuntimeWarning):
    """Derivative of ``abs`` requested at 0; 0 is used."""


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Param | Neg | BinOp | Call


def iter_nodes(node: Node):
    yield node
    if isinstance(node, Neg):
        yield from iter_nodes(node.operand)
    elif isinstance(node, BinOp):
        yield from iter_nodes(node.left)
        yield from iter_nodes(node.right)
    elif isinstance(node, Call):
        yield from iter_nodes(node.arg)


def unparse_node(node: Node) -> str:
    """Canonical fully parenthesized infix text."""
    if isinstance(node, Num):
        if node.value < 0 or math.copysign(1.0, node.value) < 0:
            return f"(-{repr(abs(node.value))})"
        return repr(node.value)
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{unparse_node(node.operand)})"
    if isinstance(node, BinOp):
        return f"({unparse_node(node.left)} {node.op} {unparse_node(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({unparse_node(node.arg)})"
    raise TypeError(node)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos + 1, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, coords, params):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.coords = coords
        self.params = params
        self.unknown: list[str] = []

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        if tok[0] == "end":
            message = f"{message}; unexpected end of input"
        else:
            message = f"{message}; found {tok[1]!r}"
        raise ExprSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            self.error(f"expected {value!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.error("trailing input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in self.coords:
                return Var(value)
            if value in self.params:
                return Param(value)
            if value not in self.unknown:
                self.unknown.append(value)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.i -= 1
        self.error("expected a number, name or '('")


# -- evaluation --------------------------------------------------------------


def _domain(message, node):
    return DomainError(message, node)


def _power(base, expo, node):
    b = value_of(base)
    if not is_active(expo):
        c = value_of(expo)
        integral = float(c).is_integer()
        if b < 0 and not integral:
            raise _domain(f"negative base {b!r} with non-integer exponent {c!r}", node)
        if b == 0 and c < 0:
            raise _domain("zero raised to a negative power", node)
        try:
            f0 = math.pow(b, c)
        except OverflowError:
            raise _domain("overflow", node) from None
        if not is_active(base):
            return f0
        if b == 0 and (0 < c < 1 or c < 0):
            raise _domain("power not differentiable at zero base", node)
        f1 = 0.0 if c == 0 else c * math.pow(b, c - 1)
        if c in (0.0, 1.0):
            f2 = 0.0
        elif b == 0 and c < 2:
            if isinstance(base, HyperDual):
                raise _domain("power not twice differentiable at zero base", node)
            f2 = 0.0
        else:
            f2 = c * (c - 1) * math.pow(b, c - 2)
        return apply(base, f0, f1, f2)
    if b <= 0:
        raise _domain(f"non-positive base {b!r} with variable exponent", node)
    return _exp(expo * _log(base, node), node)


def _exp(x, node):
    try:
        e = math.exp(value_of(x))
    except OverflowError:
        raise _domain("exp overflow", node) from None
    return apply(x, e, e, e)


def _log(x, node):
    v = value_of(x)
    if v <= 0:
        raise _domain(f"log of non-positive value {v!r}", node)
    return apply(x, math.log(v), 1.0 / v, -1.0 / (v * v))


def _sqrt(x, node):
    v = value_of(x)
    if v < 0:
        raise _domain(f"sqrt of negative value {v!r}", node)
    s = math.sqrt(v)
    if v == 0:
        if is_active(x):
            raise _domain("sqrt not differentiable at 0", node)
        return 0.0
    return apply(x, s, 0.5 / s, -0.25 / (s * v))


def _sin(x, node):
    v = value_of(x)
    s, c = math.sin(v), math.cos(v)
    return apply(x, s, c, -s)


def _cos(x, node):
    v = value_of(x)
    s, c = math.sin(v), math.cos(v)
    return apply(x, c, -s, -c)


def _tan(x, node):
    v = value_of(x)
    if math.cos(v) == 0.0:
        raise _domain("tan at a pole", node)
    t = math.tan(v)
    return apply(x, t, 1 + t * t, 2 * t * (1 + t * t))


def _abs(x, node):
    v = value_of(x)
    if v == 0 and is_active(x):
        warnings.warn(f"derivative of abs at 0 taken as 0 in {unparse_node(node)}",
                      AbsKinkWarning, stacklevel=2)
    sign = 0.0 if v == 0 else math.copysign(1.0, v)
    return apply(x, abs(v), sign, 0.0)


_FUNC_IMPL = {"sin": _sin, "cos": _cos, "tan": _tan, "exp": _exp,
              "log": _log, "sqrt": _sqrt, "abs": _abs}


def _compile(node: Node, index: Mapping[str, int]) -> Callable:
    """Compile ``node`` to ``f(x, p)`` with ``x`` chart-ordered and ``p`` a dict."""
    if isinstance(node, Num):
        v = node.value
        return lambda x, p: v
    if isinstance(node, Var):
        i = index[node.name]
        return lambda x, p: x[i]
    if isinstance(node, Param):
        name = node.name
        return lambda x, p: p[name]
    if isinstance(node, Neg):
        f = _compile(node.operand, index)
        return lambda x, p: -f(x, p)
    if isinstance(node, Call):
        f = _compile(node.arg, index)
        impl = _FUNC_IMPL[node.func]
        return lambda x, p: impl(f(x, p), node)
    a = _compile(node.left, index)
    b = _compile(node.right, index)
    op = node.op
    if op == "+":
        return lambda x, p: a(x, p) + b(x, p)
    if op == "-":
        return lambda x, p: a(x, p) - b(x, p)
    if op == "*":
        return lambda x, p: a(x, p) * b(x, p)
    if op == "/":
        def div(x, p):
            num, den = a(x, p), b(x, p)
            if value_of(den) == 0:
                raise _domain("division by zero", node)
            return num / den
        return div
    return lambda x, p: _power(a(x, p), b(x, p), node)


# -- public types ------------------------------------------------------------


@dataclass(frozen=True)
class Bindings:
    """Coordinate and parameter values; the two name spaces must be disjoint."""

    variables: Mapping[str, float] = field(default_factory=dict)
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clash = sorted(set(self.variables) & set(self.parameters))
        if clash:
            raise NameCollisionError("names bound as both coordinate and parameter: "
                                     + ", ".join(clash))


@dataclass(frozen=True, eq=False)
class Expression:
    """A parsed scalar field over an ordered coordinate chart."""

    root: Node
    chart: tuple[str, ...]
    params: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "chart", tuple(self.chart))
        object.__setattr__(self, "params", tuple(self.params))
        clash = sorted(set(self.chart) & set(self.params))
        if clash:
            raise NameCollisionError("coordinate/parameter name collision: " + ", ".join(clash))
        if len(set(self.chart)) != len(self.chart):
            raise NameCollisionError(f"duplicate coordinate names in {self.chart}")
        unknown = []
        for node in iter_nodes(self.root):
            if isinstance(node, Var) and node.name not in self.chart:
                unknown.append(node.name)
            elif isinstance(node, Param) and node.name not in self.params:
                unknown.append(node.name)
        if unknown:
            raise UnknownIdentifierError(sorted(set(unknown)))
        index = {name: i for i, name in enumerate(self.chart)}
        object.__setattr__(self, "_fn", _compile(self.root, index))

    def __eq__(self, other):
        return isinstance(other, Expression) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __str__(self):
        return self.unparse()

    def __repr__(self):
        return f"Expression({self.unparse()!r})"

    def unparse(self) -> str:
        return unparse_node(self.root)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(n.name for n in iter_nodes(self.root) if isinstance(n, Var))

    @property
    def parameters(self) -> frozenset[str]:
        return frozenset(n.name for n in iter_nodes(self.root) if isinstance(n, Param))

    def depends_on(self, name: str) -> bool:
        return name in self.variables

    @property
    def is_zero(self) -> bool:
        return isinstance(self.root, Num) and self.root.value == 0.0

    def with_chart(self, chart: Sequence[str], params: Sequence[str] | None = None) -> "Expression":
        return Expression(self.root, tuple(chart), self.params if params is None else tuple(params))

    # numeric entry points; ``x`` is chart-ordered, ``p`` maps parameter names

    def value(self, x, p: Mapping[str, float]) -> float:
        return float(value_of(self._fn(x, p)))

    def value_and_gradient(self, x, p: Mapping[str, float]) -> tuple[float, np.ndarray]:
        n = len(self.chart)
        out = self._fn(Dual.seed(np.asarray(x, dtype=float)), p)
        if isinstance(out, Dual):
            return out.value, np.array(out.d, dtype=float)
        return float(out), np.zeros(n)

    def gradient(self, x, p: Mapping[str, float]) -> np.ndarray:
        return self.value_and_gradient(x, p)[1]

    def hvp(self, x, p: Mapping[str, float], w) -> tuple[float, np.ndarray, float, np.ndarray]:
        """Return ``(f, grad f, grad f . w, Hess(f) w)`` in one hyper-dual pass."""
        x = np.asarray(x, dtype=float)
        n = x.size
        out = self._fn(HyperDual.seed(x, np.eye(n), np.asarray(w, dtype=float)), p)
        if isinstance(out, HyperDual):
            return out.value, np.array(out.d1), out.d2, np.array(out.d12)
        return float(out), np.zeros(n), 0.0, np.zeros(n)

    def hessian(self, x, p: Mapping[str, float]) -> np.ndarray:
        n = len(self.chart)
        eye = np.eye(n)
        return np.column_stack([self.hvp(x, p, eye[k])[3] for k in range(n)])

    def second_directional(self, x, p: Mapping[str, float], u, v) -> float:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(-1, 1)
        out = self._fn(HyperDual.seed(x, u, np.asarray(v, dtype=float)), p)
        if isinstance(out, HyperDual):
            return float(out.d12[0])
        return 0.0

    def point(self, b: Bindings) -> tuple[np.ndarray, dict[str, float]]:
        """Chart-ordered point and parameter dict from ``b``."""
        missing = sorted(self.variables - set(b.variables))
        missing += sorted(self.parameters - set(b.parameters))
        if missing:
            raise UnboundNameError("unbound name(s): " + ", ".join(missing))
        x = np.array([float(b.variables.get(c, math.nan)) for c in self.chart])
        return x, dict(b.parameters)


def parse(text: str, chart: Sequence[str], params: Sequence[str] = ()) -> Expression:
    """Parse ``text`` into an :class:`Expression` over ``chart``."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 1, text)
    chart, params = tuple(chart), tuple(params)
    parser = _Parser(text, set(chart), set(params))
    root = parser.parse()
    if parser.unknown:
        raise UnknownIdentifierError(parser.unknown)
    return Expression(root, chart, params)


def evaluate(e: Expression, b: Bindings) -> float:
    x, p = e.point(b)
    return e.value(x, p)


def gradient(e: Expression, b: Bindings) -> np.ndarray:
    x, p = e.point(b)
    return e.gradient(x, p)


def second_directional(e: Expression, b: Bindings, u, v) -> float:
    """``u^T Hess(e) v`` at the bound point."""
    x, p = e.point(b)
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("directions must be finite")
    return e.second_directional(x, p, u, v)


# -- tree rewriting ----------------------------------------------------------


def _const(node: Node) -> float | None:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Num):
        return -node.operand.value
    return None


def _num(c: float) -> Node:
    if c < 0:
        return Neg(Num(-c))
    return Num(abs(c))


def _neg(a: Node) -> Node:
    c = _const(a)
    if c is not None:
        return _num(-c)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _binop(op: str, a: Node, b: Node) -> Node:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        try:
            return _num(float(_compile(BinOp(op, Num(ca), Num(cb)), {})((), {})))
        except DomainError:
            return BinOp(op, a, b)
    if op == "+":
        if ca == 0:
            return b
        if cb == 0:
            return a
    elif op == "-":
        if cb == 0:
            return a
        if ca == 0:
            return _neg(b)
    elif op == "*":
        if ca == 0 or cb == 0:
            return Num(0.0)
        if ca == 1:
            return b
        if cb == 1:
            return a
        if ca == -1:
            return _neg(b)
        if cb == -1:
            return _neg(a)
    elif op == "/":
        if ca == 0:
            return Num(0.0)
        if cb == 1:
            return a
    elif op == "^":
        if cb == 0:
            return Num(1.0)
        if cb == 1:
            return a
    return BinOp(op, a, b)


def _fold(node: Node) -> Node:
    if isinstance(node, Neg):
        return _neg(_fold(node.operand))
    if isinstance(node, BinOp):
        return _binop(node.op, _fold(node.left), _fold(node.right))
    if isinstance(node, Call):
        arg = _fold(node.arg)
        c = _const(arg)
        if c is not None:
            try:
                return _num(float(_FUNC_IMPL[node.func](c, node)))
            except DomainError:
                pass
        return Call(node.func, arg)
    return node


def _replace(node: Node, mapping: Mapping[str, Node]) -> Node:
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(_replace(node.operand, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, _replace(node.left, mapping), _replace(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.func, _replace(node.arg, mapping))
    return node


def substitute(e: Expression, values: Mapping[str, float],
               chart: Sequence[str] | None = None) -> Expression:
    """Replace coordinates by constants and fold trivial arithmetic.

    The result is rebound to ``chart`` (default: the original chart).
    """
    root = _fold(_replace(e.root, {k: _num(float(v)) for k, v in values.items()}))
    return Expression(root, e.chart if chart is None else tuple(chart), e.params)


def _diff(node: Node, name: str) -> Node:
    if isinstance(node, (Num, Param)):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == name else 0.0)
    if isinstance(node, Neg):
        return _neg(_diff(node.operand, name))
    if isinstance(node, Call):
        u = node.arg
        du = _diff(u, name)
        if _const(du) == 0:
            return Num(0.0)
        f = node.func
        if f == "sin":
            outer = Call("cos", u)
        elif f == "cos":
            outer = _neg(Call("sin", u))
        elif f == "tan":
            outer = _binop("+", Num(1.0), BinOp("^", Call("tan", u), Num(2.0)))
        elif f == "exp":
            outer = node
        elif f == "log":
            return _binop("/", du, u)
        elif f == "sqrt":
            return _binop("/", du, _binop("*", Num(2.0), node))
        else:  # abs: u/|u|, undefined at the kink
            outer = _binop("/", u, node)
        return _binop("*", outer, du)
    a, b = node.left, node.right
    da, db = _diff(a, name), _diff(b, name)
    op = node.op
    if op in "+-":
        return _binop(op, da, db)
    if op == "*":
        return _binop("+", _binop("*", da, b), _binop("*", a, db))
    if op == "/":
        return _binop("/", _binop("-", _binop("*", da, b), _binop("*", a, db)),
                      BinOp("^", b, Num(2.0)))
    if _const(db) == 0:
        c = _const(b)
        reduced = _num(c - 1) if c is not None else _binop("-", b, Num(1.0))
        return _binop("*", _binop("*", b, _binop("^", a, reduced)), da)
    return _binop("*", node, _binop("+", _binop("*", db, Call("log", a)),
                                    _binop("/", _binop("*", b, da), a)))


def differentiate(e: Expression, name: str) -> Expression:
    """Symbolic partial derivative with respect to coordinate ``name``."""
    if name not in e.chart:
        raise UnknownIdentifierError([name])
    return Expression(_fold(_diff(e.root, name)), e.chart, e.params)


def constant(value: float, chart: Sequence[str], params: Sequence[str] = ()) -> Expression:
    return Expression(_num(float(value)), tuple(chart), tuple(params))


def combine(op: str, a: Expression, b: Expression) -> Expression:
    """``a op b`` on a shared chart (no folding)."""
    if a.chart != b.chart:
        raise ExprError("cannot combine expressions on different charts")
    params = tuple(dict.fromkeys(a.params + b.params))
    return Expression(BinOp(op, a.root, b.root), a.chart, params)
