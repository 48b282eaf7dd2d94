"""Closed-form periodic functions of ``t`` parsed from text.

Grammar (no implicit multiplication)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?            # right associative
    atom   := NUMBER | 'pi' | 't' | NAME | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | tan | exp | sqrt | abs

The exponent of ``^`` must be a constant that evaluates to an integer, which
keeps parsed inputs inside the quotient-of-trig-polynomials class.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "sqrt", "abs")
RESERVED = frozenset(FUNCTIONS) | {"t", "pi"}

# |cos(x)| at or below this is treated as a pole of tan(x)
TAN_POLE_EPS = 1e-12


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.message = message
        self.offset = offset


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, bound: tuple[str, ...]):
        listed = ", ".join(bound) if bound else "<none>"
        super().__init__(f"unknown identifier {name!r}; bound names: {listed}")
        self.name = name
        self.bound = bound


class UnboundParameter(ExprError):
    def __init__(self, name: str):
        super().__init__(f"parameter {name!r} is not bound")
        self.name = name


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain (pole, negative sqrt, overflow)."""


# ---------------------------------------------------------------------------
# Expression tree

class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str  # only "pi"


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


T = Var()
ZERO = Num(0.0)
ONE = Num(1.0)


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int  # byte offset


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    byte = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", byte)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, text, byte))
        byte += len(text.encode("utf-8"))
        pos = m.end()
    toks.append(_Tok("end", "", byte))
    return toks


class _Parser:
    def __init__(self, src: str, names: frozenset[str] | None):
        self.toks = _tokenize(src)
        self.i = 0
        self.names = names

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            got = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ParseError(f"expected {text!r}, got {got}", self.tok.offset)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(
                f"expected operator or end of input, got {self.tok.text!r}", self.tok.offset
            )
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            offset = self.tok.offset
            exponent = self.unary()
            if not _is_integer_constant(exponent):
                raise ParseError("exponent of '^' must be an integer constant", offset)
            return BinOp("^", base, exponent)
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text == "t":
                return T
            if tok.text == "pi":
                return Const("pi")
            if self.names is not None and tok.text not in self.names:
                raise UnknownIdentifier(tok.text, tuple(sorted(self.names | RESERVED)))
            return Param(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        got = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(f"expected number, name or '(', got {got}", tok.offset)


def _is_integer_constant(e: Expr) -> bool:
    if any(isinstance(n, (Var, Param)) for n in walk(e)):
        return False
    try:
        v = float(eval_expr(e, 0.0))
    except ExprError:
        return False
    return math.isfinite(v) and v == round(v)


def parse(src: str | bytes, names: set[str] | frozenset[str] | None = None) -> Expr:
    """Parse ``src`` into an expression tree.

    If ``names`` is given, identifiers other than ``t``, ``pi`` and the
    built-in functions must belong to it.
    """
    if isinstance(src, (bytes, bytearray)):
        try:
            src = bytes(src).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("input is not valid UTF-8", exc.start) from None
    if not src.strip():
        raise ParseError("empty expression", 0)
    try:
        return _Parser(src, None if names is None else frozenset(names)).parse()
    except RecursionError:
        raise ParseError("expression nested too deeply", 0) from None


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _NEG_PREC
    return _ATOM_PREC


def _fmt_num(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot print non-finite literal {v}")
    if v == int(v) and abs(v) < 1e16:
        s = str(int(abs(v)))
    else:
        s = repr(abs(v))
    return "-" + s if math.copysign(1.0, v) < 0 else s


def to_text(e: Expr) -> str:
    """Print ``e`` so that ``parse(to_text(e))`` rebuilds the same tree."""
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        return f"({s})" if s.startswith("-") else s
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        if _prec(e.arg) < _NEG_PREC:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = to_text(e.left), to_text(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < _NEG_PREC:
                right = f"({right})"
        else:
            if _prec(e.left) < p:
                left = f"({left})"
            if _prec(e.right) <= p:
                right = f"({right})"
        return f"{left}{e.op}{right}" if e.op in "*/^" else f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation

def walk(e: Expr):
    yield e
    if isinstance(e, (Neg, Call)):
        yield from walk(e.arg)
    elif isinstance(e, BinOp):
        yield from walk(e.left)
        yield from walk(e.right)


def free_params(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Param)}


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite value")
    return x


def _div(num, den):
    if np.any(den == 0):
        raise DomainError("division by zero")
    return num / den


def _pow(base, n: int):
    if n < 0 and np.any(base == 0):
        raise DomainError("zero raised to a negative power")
    return base ** n if n >= 0 else 1.0 / base ** (-n)


def _tan(x):
    if np.any(np.abs(np.cos(x)) <= TAN_POLE_EPS):
        raise DomainError("pole of tan")
    return np.tan(x)


def _sqrt(x):
    if np.any(x < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(x)


_FUNCS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": _tan,
    "exp": np.exp,
    "sqrt": _sqrt,
    "abs": np.abs,
}


def compile_expr(e: Expr, params: Mapping[str, float] | None = None) -> Callable:
    """Compile ``e`` into a closure ``f(t)`` with parameters bound.

    ``f`` accepts floats or numpy arrays and raises :class:`DomainError`
    instead of returning non-finite values.
    """
    params = dict(params or {})
    inner = _compile(e, params)

    def f(t):
        with np.errstate(all="ignore"):
            return _check_finite(inner(t))

    return f


def compile_raw(e: Expr, params: Mapping[str, float] | None = None) -> Callable:
    """Like :func:`compile_expr` without the finiteness check or errstate guard."""
    return _compile(e, dict(params or {}))


def _compile(e: Expr, params: dict) -> Callable:
    if isinstance(e, Num):
        v = e.value
        return lambda t: v + 0.0 * t
    if isinstance(e, Const):
        v = math.pi
        return lambda t: v + 0.0 * t
    if isinstance(e, Var):
        return lambda t: t
    if isinstance(e, Param):
        if e.name not in params:
            raise UnboundParameter(e.name)
        v = float(params[e.name])
        return lambda t: v + 0.0 * t
    if isinstance(e, Neg):
        a = _compile(e.arg, params)
        return lambda t: -a(t)
    if isinstance(e, Call):
        a = _compile(e.arg, params)
        fn = _FUNCS[e.func]
        return lambda t: fn(a(t))
    if isinstance(e, BinOp):
        l = _compile(e.left, params)
        if e.op == "^":
            n = int(round(float(eval_expr(e.right, 0.0))))
            return lambda t: _pow(l(t), n)
        r = _compile(e.right, params)
        if e.op == "+":
            return lambda t: l(t) + r(t)
        if e.op == "-":
            return lambda t: l(t) - r(t)
        if e.op == "*":
            return lambda t: l(t) * r(t)
        if e.op == "/":
            return lambda t: _div(l(t), r(t))
    raise TypeError(f"not an expression node: {e!r}")


def eval_expr(e: Expr, t, params: Mapping[str, float] | None = None):
    """Evaluate ``e`` at ``t`` (float or array) with ``params`` bound."""
    out = compile_expr(e, params)(np.asarray(t, dtype=float) if np.ndim(t) else float(t))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Construction helpers with light constant folding

def _is_num(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Num) and (v is None or e.value == v)


def num(v: float) -> Expr:
    return Num(float(v))


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if isinstance(b, Neg):
        return BinOp("+", a, b.arg)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return neg(b)
    if _is_num(b, -1.0):
        return neg(a)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Num) and (a.value != 0 or n > 0):
        return Num(a.value ** n)
    return BinOp("^", a, Num(float(n)) if n >= 0 else Neg(Num(float(-n))))


def call(func: str, a: Expr) -> Expr:
    return Call(func, a)


def substitute(e: Expr, params: Mapping[str, float]) -> Expr:
    """Replace bound parameters by numeric literals."""
    if isinstance(e, Param):
        return Num(float(params[e.name])) if e.name in params else e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, params))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, params))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, params), substitute(e.right, params))
    return e


def diff(e: Expr) -> Expr:
    """Symbolic derivative with respect to ``t``.

    Parameters are treated as constants. The result of ``abs`` differentiation
    is undefined (evaluation error) where its argument vanishes.
    """
    if isinstance(e, (Num, Const, Param)):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return neg(diff(e.arg))
    if isinstance(e, BinOp):
        u, v = e.left, e.right
        if e.op == "+":
            return add(diff(u), diff(v))
        if e.op == "-":
            return sub(diff(u), diff(v))
        if e.op == "*":
            return add(mul(diff(u), v), mul(u, diff(v)))
        if e.op == "/":
            return div(sub(mul(diff(u), v), mul(u, diff(v))), power(v, 2))
        if e.op == "^":
            n = int(round(float(eval_expr(v, 0.0))))
            return mul(mul(num(n), power(u, n - 1)), diff(u))
    if isinstance(e, Call):
        u = e.arg
        du = diff(u)
        if _is_num(du, 0.0):
            return ZERO
        if e.func == "sin":
            return mul(call("cos", u), du)
        if e.func == "cos":
            return neg(mul(call("sin", u), du))
        if e.func == "tan":
            return div(du, power(call("cos", u), 2))
        if e.func == "exp":
            return mul(e, du)
        if e.func == "sqrt":
            return div(du, mul(num(2), e))
        if e.func == "abs":
            return div(mul(u, du), e)
    raise TypeError(f"cannot differentiate {e!r}")
