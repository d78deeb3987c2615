"""Small expression language for weights, defining functions and densities.

Grammar (whitespace ignored)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = ("-" | "+") unary | power ;
    power    = atom [ ("^" | "**") exponent ] ;
    exponent = [ "-" | "+" ] integer | "(" [ "-" | "+" ] integer ")" ;
    atom     = number | name | func "(" expr { "," expr } ")" | "(" expr ")" ;
    func     = "exp" | "log" | "abs2" | "re" | "im" | "max" | "min" ;

``pi`` is a predefined constant unless declared as a variable.  Powers bind
tighter than unary minus, so ``-x^2`` is ``-(x^2)``.

Evaluation is vectorised over numpy arrays.  ``log`` of a nonpositive number
gives ``-inf`` (the psh convention); division by an exact zero raises.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "REAL",
    "COMPLEX",
    "Expression",
    "ExpressionError",
    "ParseError",
    "EvaluationError",
    "SingularStencilError",
    "parse",
    "evaluate",
    "gradient_fd",
    "partial_fd",
    "wirtinger_fd",
]

REAL = "real"
COMPLEX = "complex"
_KIND_ALIASES = {
    "real": REAL,
    "r": REAL,
    "real scalar": REAL,
    "real vector component": REAL,
    "complex": COMPLEX,
    "c": COMPLEX,
    "complex scalar": COMPLEX,
    "complex vector component": COMPLEX,
}

_FUNCS = {"exp": 1, "log": 1, "abs2": 1, "re": 1, "im": 1, "max": -2, "min": -2}


class ExpressionError(Exception):
    pass


class ParseError(ExpressionError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvaluationError(ExpressionError):
    pass


class SingularStencilError(EvaluationError):
    pass


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Pow, Call]


# ------------------------------------------------------------------ lexer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text, kinds):
        self.text = text
        self.kinds = kinds
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            found = text or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return Pow(base, self.exponent())
        return base

    def exponent(self):
        paren = False
        if self.peek()[1] == "(":
            self.take()
            paren = True
        sign = 1
        if self.peek()[1] in ("-", "+"):
            sign = -1 if self.take()[1] == "-" else 1
        kind, text, pos = self.take()
        if kind != "num":
            raise ParseError("non-integer exponent", pos)
        value = float(text)
        if not value.is_integer() or not re.fullmatch(r"\d+\.?0*", text):
            raise ParseError(f"non-integer exponent {text!r}", pos)
        if paren:
            self.expect(")")
        return sign * int(value)

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in _FUNCS:
                return self.call(text, pos)
            if text in self.kinds:
                return Var(text)
            if text == "pi":
                return Const(math.pi)
            raise ParseError(f"undeclared variable {text!r}", pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = text or "end of input"
        raise ParseError(f"unexpected token {found!r}", pos)

    def call(self, name, pos):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = _FUNCS[name]
        if arity > 0 and len(args) != arity:
            raise ParseError(f"{name} takes {arity} argument(s), got {len(args)}", pos)
        if arity < 0 and len(args) < -arity:
            raise ParseError(f"{name} takes at least {-arity} arguments", pos)
        return Call(name, tuple(args))


# ---------------------------------------------------------------- typing


def _kind_of(node, kinds):
    if isinstance(node, Const):
        return REAL
    if isinstance(node, Var):
        return kinds[node.name]
    if isinstance(node, Neg):
        return _kind_of(node.arg, kinds)
    if isinstance(node, Pow):
        return _kind_of(node.base, kinds)
    if isinstance(node, BinOp):
        a = _kind_of(node.left, kinds)
        b = _kind_of(node.right, kinds)
        return COMPLEX if COMPLEX in (a, b) else REAL
    if node.func in ("abs2", "re", "im"):
        for arg in node.args:
            _kind_of(arg, kinds)
        return REAL
    arg_kinds = [_kind_of(arg, kinds) for arg in node.args]
    if node.func == "exp":
        return arg_kinds[0]
    if COMPLEX in arg_kinds:
        raise ParseError(f"{node.func} needs a real argument; wrap it in re/im/abs2")
    return REAL


def _free_names(node, out):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, (Neg,)):
        _free_names(node.arg, out)
    elif isinstance(node, Pow):
        _free_names(node.base, out)
    elif isinstance(node, BinOp):
        _free_names(node.left, out)
        _free_names(node.right, out)
    elif isinstance(node, Call):
        for arg in node.args:
            _free_names(arg, out)
    return out


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_const(value):
    if value == math.pi:
        return "pi"
    text = repr(float(value))
    if text in ("inf", "nan"):
        raise ExpressionError(f"cannot print constant {text}")
    return text


def _to_text(node, parent_prec=0):
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(_to_text(a) for a in node.args)})"
    if isinstance(node, Pow):
        base = _to_text(node.base, 4)
        if not isinstance(node.base, (Const, Var, Call)):
            base = f"({_to_text(node.base)})"
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{base}^{exp}"
    if isinstance(node, Neg):
        text = f"-{_to_text(node.arg, 3)}"
        return f"({text})" if parent_prec >= 3 else text
    prec = _PREC[node.op]
    left = _to_text(node.left, prec)
    # right operand of - and / needs parentheses at equal precedence
    right = _to_text(node.right, prec + 1)
    text = f"{left} {node.op} {right}"
    return f"({text})" if prec < parent_prec else text


# ---------------------------------------------------------------- evaluation


def _safe_mul(a, b):
    with np.errstate(invalid="ignore"):
        out = np.multiply(a, b)
    if np.iscomplexobj(out):
        return out
    # 0 * (+-inf) = 0, the measure-theoretic convention
    bad = np.isnan(out) & ~np.isnan(a) & ~np.isnan(b)
    if np.any(bad):
        out = np.where(bad, 0.0, out)
    return out


def _log(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.where(x > 0, x, 1.0))
    return np.where(x > 0, out, np.where(np.isnan(x), np.nan, -np.inf))


def _eval(node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return _safe_mul(a, b)
        if np.any(np.asarray(b) == 0):
            raise EvaluationError("division by zero")
        with np.errstate(invalid="ignore", over="ignore"):
            return a / b
    if isinstance(node, Pow):
        base = _eval(node.base, env)
        k = node.exponent
        if k < 0:
            if np.any(np.asarray(base) == 0):
                raise EvaluationError("division by zero (negative power of 0)")
            with np.errstate(over="ignore"):
                return 1.0 / base ** (-k)
        with np.errstate(over="ignore", invalid="ignore"):
            return base**k
    args = [_eval(a, env) for a in node.args]
    f = node.func
    if f == "exp":
        with np.errstate(over="ignore"):
            return np.exp(args[0])
    if f == "log":
        return _log(args[0])
    if f == "abs2":
        x = args[0]
        if np.iscomplexobj(x):
            return x.real * x.real + x.imag * x.imag
        return x * x
    if f == "re":
        return np.real(args[0])
    if f == "im":
        return np.imag(args[0]) if np.iscomplexobj(args[0]) else 0.0 * args[0]
    reduce = np.maximum if f == "max" else np.minimum
    out = args[0]
    for a in args[1:]:
        out = reduce(out, a)
    return out


class Expression:
    """Immutable parsed expression with declared variables.

    Parameters are set by :func:`parse`; ``free_vars`` is the ordered list of
    ``(name, kind)`` pairs that bindings must supply.
    """

    __slots__ = ("ast", "free_vars", "text", "_kinds", "_kind")

    def __init__(self, ast, free_vars, text=None):
        object.__setattr__(self, "ast", ast)
        object.__setattr__(self, "free_vars", tuple(free_vars))
        kinds = dict(free_vars)
        object.__setattr__(self, "_kinds", kinds)
        object.__setattr__(self, "_kind", _kind_of(ast, kinds))
        object.__setattr__(self, "text", text if text is not None else _to_text(ast))

    def __setattr__(self, name, value):
        raise AttributeError("Expression is immutable")

    @property
    def kind(self):
        """Static result kind, ``"real"`` or ``"complex"``."""
        return self._kind

    @property
    def names(self):
        return [name for name, _ in self.free_vars]

    def kind_of(self, name):
        return self._kinds[name]

    def to_string(self):
        return _to_text(self.ast)

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"Expression({self.text!r}, free_vars={list(self.free_vars)!r})"

    def __call__(self, **binding):
        return evaluate(self, binding)


def parse(text: str, declared_vars: Sequence[tuple]) -> Expression:
    """Parse ``text`` with the given ``(name, kind)`` declarations."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression")
    free_vars = []
    seen = set()
    for name, kind in declared_vars:
        if name in seen:
            raise ParseError(f"variable {name!r} declared twice")
        if name in _FUNCS:
            raise ParseError(f"{name!r} is a reserved function name")
        seen.add(name)
        try:
            free_vars.append((name, _KIND_ALIASES[str(kind).lower()]))
        except KeyError:
            raise ParseError(f"unknown variable kind {kind!r}") from None
    kinds = dict(free_vars)
    ast = _Parser(text, kinds).parse()
    missing = _free_names(ast, set()) - set(kinds)
    if missing:  # pragma: no cover - parser rejects these earlier
        raise ParseError(f"undeclared variables {sorted(missing)}")
    return Expression(ast, free_vars, text.strip())


def _coerce(expr, binding):
    env = {}
    for name, kind in expr.free_vars:
        if name not in binding:
            raise EvaluationError(f"no value bound for {name!r}")
        value = np.asarray(binding[name])
        if kind == REAL:
            if np.iscomplexobj(value):
                if np.any(value.imag != 0):
                    raise EvaluationError(f"kind mismatch: {name!r} is real")
                value = value.real
            value = value.astype(float)
        else:
            value = value.astype(complex)
        env[name] = value
    return env


def evaluate(expr: Expression, binding: Mapping[str, object]):
    """Evaluate ``expr``; array bindings broadcast.

    Returns a float/complex for scalar bindings, otherwise an ndarray.
    """
    env = _coerce(expr, binding)
    with np.errstate(over="ignore"):
        out = _eval(expr.ast, env)
    out = np.asarray(out)
    if expr.kind == REAL and np.iscomplexobj(out):
        out = out.real
    if out.ndim == 0:
        return out.item()
    return out


# ------------------------------------------------------------ differences


def _coords(expr):
    out = []
    for name, kind in expr.free_vars:
        if kind == COMPLEX:
            out += [(name, "re"), (name, "im")]
        else:
            out.append((name, None))
    return out


def _shift(binding, coord, delta):
    name, part = coord
    new = dict(binding)
    step = 1j * delta if part == "im" else delta
    new[name] = np.asarray(binding[name]) + step
    return new


def _checked(expr, binding):
    value = np.asarray(evaluate(expr, binding))
    if np.any(~np.isfinite(value)):
        raise SingularStencilError("singular stencil: non-finite value inside the difference stencil")
    return value


def partial_fd(expr: Expression, binding, *coords, h=1e-4):
    """Central-difference partial derivative of order ``len(coords)`` (1 or 2).

    ``coords`` are ``(name, part)`` pairs, ``part`` in ``{None, "re", "im"}``.
    """
    if len(coords) == 1:
        c = coords[0]
        plus = _checked(expr, _shift(binding, c, h))
        minus = _checked(expr, _shift(binding, c, -h))
        return (plus - minus) / (2 * h)
    if len(coords) != 2:
        raise ValueError("only first and second derivatives are supported")
    a, b = coords
    if a == b:
        plus = _checked(expr, _shift(binding, a, h))
        mid = _checked(expr, binding)
        minus = _checked(expr, _shift(binding, a, -h))
        return (plus - 2 * mid + minus) / (h * h)
    pp = _checked(expr, _shift(_shift(binding, a, h), b, h))
    pm = _checked(expr, _shift(_shift(binding, a, h), b, -h))
    mp = _checked(expr, _shift(_shift(binding, a, -h), b, h))
    mm = _checked(expr, _shift(_shift(binding, a, -h), b, -h))
    return (pp - pm - mp + mm) / (4 * h * h)


def gradient_fd(expr: Expression, binding, h=1e-4):
    """Gradient in real coordinates, complex variables contributing (re, im)."""
    if expr.kind == COMPLEX:
        raise EvaluationError("gradient needs a real-valued expression")
    return np.array([partial_fd(expr, binding, c, h=h) for c in _coords(expr)])


def wirtinger_fd(expr: Expression, binding, a: str, b: str, h=1e-4):
    """Mixed Wirtinger derivative d^2 f / (da d(conj b)) of a real expression.

    For ``a == b`` this is a quarter of the Laplacian in that variable.
    """
    ar, ai = (a, "re"), (a, "im")
    br, bi = (b, "re"), (b, "im")
    d = lambda u, v: partial_fd(expr, binding, u, v, h=h)  # noqa: E731
    real = d(ar, br) + d(ai, bi)
    if a == b:
        return real / 4
    imag = d(ar, bi) - d(ai, br)
    return (real + 1j * imag) / 4
