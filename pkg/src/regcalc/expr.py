"""Symbolic expressions over real variables x1, x2, ...

A small closed language used wherever a chart transition, Christoffel
coefficient, or weight function has to be differentiated exactly:
rational constants, + - * / and integer powers, sin cos exp log sqrt,
and a bump primitive that is smooth everywhere and identically zero
outside the open interval (-1, 1).

Expressions are immutable trees.  The module-level constructors
(``add``, ``mul``, ``power``, ...) do light local folding, so parsing
the printed form of a tree gives back an equal tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg",
    "Call", "Bump",
    "ExprError", "ParseError", "DomainError",
    "as_expr", "add", "sub", "mul", "div", "power", "neg", "call",
    "sin", "cos", "exp", "log", "sqrt", "bump",
    "parse", "to_text", "free_variables", "substitute",
    "derive", "differentiate", "evaluate", "evaluate_grid",
    "MAX_DERIVATIVE_ORDER",
]

# Total derivative order accepted by differentiate().  Plenty for the
# regularity degrees this package checks, and keeps tree sizes sane.
MAX_DERIVATIVE_ORDER = 12

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(ValueError):
    """Malformed expression or unsupported request."""


class ParseError(ExprError):
    """Syntax error; carries the character offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the domain (division by zero, log of a
    nonpositive number, overflow)."""


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, n):
        return power(self, n)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: Fraction

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    index: int  # 1-based, prints as x{index}

    def __repr__(self):
        return f"Var(x{self.index})"


@dataclass(frozen=True, repr=False)
class Add(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Add({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Sub(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Sub({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Mul({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Div(Expr):
    num: Expr
    den: Expr

    def __repr__(self):
        return f"Div({self.num!r}, {self.den!r})"


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    fn: str  # one of FUNCTIONS
    arg: Expr

    def __repr__(self):
        return f"Call({self.fn}, {self.arg!r})"


@dataclass(frozen=True, repr=False)
class Bump(Expr):
    """order-th derivative of t -> exp(-1/(1-t^2)) on (-1,1), else 0."""

    order: int
    arg: Expr

    def __repr__(self):
        return f"Bump({self.order}, {self.arg!r})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_expr(x) -> Expr:
    """Coerce a number to a constant node; pass expressions through."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(Fraction(x))
    if isinstance(x, float):
        return Const(Fraction(x))
    raise ExprError(f"cannot interpret {x!r} as an expression")


def _const(e: Expr) -> Fraction | None:
    return e.value if isinstance(e, Const) else None


def add(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    return Add(a, b)


def sub(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return neg(b)
    return Sub(a, b)


def mul(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    return Mul(a, b)


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    ca, cb = _const(a), _const(b)
    if cb is not None and cb != 0:
        if ca is not None:
            return Const(ca / cb)
        if cb == 1:
            return a
    if ca == 0 and (cb is None or cb != 0):
        return ZERO
    return Div(a, b)


def power(base, n) -> Expr:
    base = as_expr(base)
    if isinstance(n, Expr):
        c = _const(n)
        if c is None or c.denominator != 1:
            raise ExprError("exponent must be an integer constant")
        n = int(c)
    if not isinstance(n, int):
        raise ExprError("exponent must be an integer constant")
    if n == 0:
        return ONE
    if n == 1:
        return base
    c = _const(base)
    if c is not None and not (c == 0 and n < 0):
        return Const(c ** n)
    return Pow(base, n)


def neg(a) -> Expr:
    a = as_expr(a)
    c = _const(a)
    if c is not None:
        return Const(-c)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(fn: str, arg) -> Expr:
    if fn not in FUNCTIONS:
        raise ExprError(f"unknown function {fn!r}")
    return Call(fn, as_expr(arg))


def sin(arg) -> Expr:
    return call("sin", arg)


def cos(arg) -> Expr:
    return call("cos", arg)


def exp(arg) -> Expr:
    return call("exp", arg)


def log(arg) -> Expr:
    return call("log", arg)


def sqrt(arg) -> Expr:
    return call("sqrt", arg)


def bump(arg, order: int = 0) -> Expr:
    if not isinstance(order, int) or order < 0:
        raise ExprError("bump order must be a nonnegative integer")
    return Bump(order, as_expr(arg))


# ---------------------------------------------------------------------------
# structure

def free_variables(e: Expr) -> frozenset[int]:
    """Indices of the variables that occur in e."""
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.index,))
    if isinstance(e, (Add, Sub, Mul)):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Div):
        return free_variables(e.num) | free_variables(e.den)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, (Neg,)):
        return free_variables(e.arg)
    if isinstance(e, (Call, Bump)):
        return free_variables(e.arg)
    raise ExprError(f"unknown node {e!r}")


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace each variable by mapping[index]; used for compositions.

    Variables absent from the mapping are left alone.  The result is
    rebuilt with the folding constructors.
    """
    for k, v in mapping.items():
        if not isinstance(k, int) or k < 1:
            raise ExprError(f"bad variable index {k!r} in substitution")
        if not isinstance(v, Expr):
            raise ExprError(f"substitution for x{k} is not an expression")
    return _subst(e, mapping)


def _subst(e: Expr, m: Mapping[int, Expr]) -> Expr:
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return m.get(e.index, e)
    if isinstance(e, Add):
        return add(_subst(e.left, m), _subst(e.right, m))
    if isinstance(e, Sub):
        return sub(_subst(e.left, m), _subst(e.right, m))
    if isinstance(e, Mul):
        return mul(_subst(e.left, m), _subst(e.right, m))
    if isinstance(e, Div):
        return div(_subst(e.num, m), _subst(e.den, m))
    if isinstance(e, Pow):
        return power(_subst(e.base, m), e.exponent)
    if isinstance(e, Neg):
        return neg(_subst(e.arg, m))
    if isinstance(e, Call):
        return call(e.fn, _subst(e.arg, m))
    if isinstance(e, Bump):
        return bump(_subst(e.arg, m), e.order)
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# differentiation

def derive(e: Expr, var: int) -> Expr:
    """Partial derivative with respect to x{var}."""
    if not isinstance(var, int) or var < 1:
        raise ExprError(f"bad variable index {var!r}")
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == var else ZERO
    if isinstance(e, Add):
        return add(derive(e.left, var), derive(e.right, var))
    if isinstance(e, Sub):
        return sub(derive(e.left, var), derive(e.right, var))
    if isinstance(e, Mul):
        return add(mul(derive(e.left, var), e.right),
                   mul(e.left, derive(e.right, var)))
    if isinstance(e, Div):
        return div(sub(mul(derive(e.num, var), e.den),
                       mul(e.num, derive(e.den, var))),
                   power(e.den, 2))
    if isinstance(e, Pow):
        return mul(mul(as_expr(e.exponent), power(e.base, e.exponent - 1)),
                   derive(e.base, var))
    if isinstance(e, Neg):
        return neg(derive(e.arg, var))
    if isinstance(e, Call):
        du = derive(e.arg, var)
        if e.fn == "sin":
            return mul(cos(e.arg), du)
        if e.fn == "cos":
            return neg(mul(sin(e.arg), du))
        if e.fn == "exp":
            return mul(exp(e.arg), du)
        if e.fn == "log":
            return div(du, e.arg)
        if e.fn == "sqrt":
            return div(du, mul(2, sqrt(e.arg)))
    if isinstance(e, Bump):
        return mul(Bump(e.order + 1, e.arg), derive(e.arg, var))
    raise ExprError(f"unknown node {e!r}")


def differentiate(e: Expr, orders: Mapping[int, int]) -> Expr:
    """Iterated partial derivative, orders = {variable index: order}.

    The total order is capped at MAX_DERIVATIVE_ORDER.
    """
    total = 0
    for var, k in orders.items():
        if not isinstance(var, int) or var < 1:
            raise ExprError(f"bad variable index {var!r}")
        if not isinstance(k, int) or k < 0:
            raise ExprError(f"bad derivative order {k!r} for x{var}")
        total += k
    if total > MAX_DERIVATIVE_ORDER:
        raise ExprError(
            f"total derivative order {total} exceeds the supported "
            f"bound {MAX_DERIVATIVE_ORDER}")
    out = e
    for var in sorted(orders):
        for _ in range(orders[var]):
            out = derive(out, var)
    return out


# ---------------------------------------------------------------------------
# bump derivative polynomials
#
# On (-1,1) the order-k node evaluates to P_k(t) / (1-t^2)^(2k) * w(t)
# with w(t) = exp(-1/(1-t^2)).  Differentiating that form once gives the
# integer-coefficient recurrence below, with P_0 = 1.

_bump_polys: dict[int, tuple[int, ...]] = {0: (1,)}


def _poly_add(p: tuple[int, ...], q: tuple[int, ...]) -> tuple[int, ...]:
    n = max(len(p), len(q))
    return tuple((p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0)
                 for i in range(n))


def _poly_mul(p: tuple[int, ...], q: tuple[int, ...]) -> tuple[int, ...]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return tuple(out)


def _poly_diff(p: tuple[int, ...]) -> tuple[int, ...]:
    if len(p) <= 1:
        return (0,)
    return tuple(i * c for i, c in enumerate(p))[1:]


def _bump_poly(k: int) -> tuple[int, ...]:
    while k not in _bump_polys:
        j = max(_bump_polys)
        p = _bump_polys[j]
        s2 = (1, 0, -2, 0, 1)           # (1-t^2)^2
        s = (1, 0, -1)                  # 1-t^2
        nxt = _poly_mul(_poly_diff(p), s2)
        nxt = _poly_add(nxt, _poly_mul(_poly_mul((0, 4 * j), s), p))
        nxt = _poly_add(nxt, _poly_mul((0, -2), p))
        _bump_polys[j + 1] = nxt
    return _bump_polys[k]


def _bump_scalar(k: int, t: float) -> float:
    s = 1.0 - t * t
    if s <= 0.0:
        return 0.0
    # P_k(t) * exp(-1/s - 2k log s); the exponential absorbs the
    # (1-t^2)^(2k) denominator so t near +-1 underflows cleanly to 0.
    expo = -1.0 / s - 2.0 * k * math.log(s)
    if expo < -745.0:
        return 0.0
    p = 0.0
    for c in reversed(_bump_poly(k)):
        p = p * t + c
    return p * math.exp(expo)


# ---------------------------------------------------------------------------
# evaluation

def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate at a point, x{i} = point[i-1].  Raises DomainError on
    division by zero, log/sqrt domain violations, or overflow."""
    val = _eval(e, point, {})
    if not math.isfinite(val):
        raise DomainError(f"evaluation of {to_text(e)} at {tuple(point)} "
                          f"is not finite")
    return val


def _eval(e: Expr, pt: Sequence[float], cache: dict) -> float:
    # derivative trees share subtrees heavily; cache by identity
    key = id(e)
    got = cache.get(key)
    if got is None:
        got = cache[key] = _eval_raw(e, pt, cache)
    return got


def _eval_raw(e: Expr, pt: Sequence[float], cache: dict) -> float:
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        if e.index > len(pt):
            raise DomainError(f"point has no coordinate x{e.index}")
        return float(pt[e.index - 1])
    if isinstance(e, Add):
        return _eval(e.left, pt, cache) + _eval(e.right, pt, cache)
    if isinstance(e, Sub):
        return _eval(e.left, pt, cache) - _eval(e.right, pt, cache)
    if isinstance(e, Mul):
        return _eval(e.left, pt, cache) * _eval(e.right, pt, cache)
    if isinstance(e, Div):
        d = _eval(e.den, pt, cache)
        if d == 0.0:
            raise DomainError(f"division by zero in {to_text(e)} at {tuple(pt)}")
        return _eval(e.num, pt, cache) / d
    if isinstance(e, Pow):
        b = _eval(e.base, pt, cache)
        if b == 0.0 and e.exponent < 0:
            raise DomainError(f"zero base with negative exponent at {tuple(pt)}")
        try:
            return b ** e.exponent
        except OverflowError:
            raise DomainError(f"overflow in {to_text(e)} at {tuple(pt)}") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, pt, cache)
    if isinstance(e, Call):
        u = _eval(e.arg, pt, cache)
        if e.fn == "sin":
            return math.sin(u)
        if e.fn == "cos":
            return math.cos(u)
        if e.fn == "exp":
            try:
                return math.exp(u)
            except OverflowError:
                raise DomainError(f"overflow in exp at {tuple(pt)}") from None
        if e.fn == "log":
            if u <= 0.0:
                raise DomainError(f"log of nonpositive value {u} at {tuple(pt)}")
            return math.log(u)
        if e.fn == "sqrt":
            if u < 0.0:
                raise DomainError(f"sqrt of negative value {u} at {tuple(pt)}")
            return math.sqrt(u)
    if isinstance(e, Bump):
        return _bump_scalar(e.order, _eval(e.arg, pt, cache))
    raise ExprError(f"unknown node {e!r}")


def evaluate_grid(e: Expr, points: np.ndarray) -> np.ndarray:
    """Vectorised evaluate.  points has shape (m, n); returns shape (m,).

    Same domain rules as evaluate; the error names the first offending
    point.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ExprError("points must be a 2d array, one row per point")
    with np.errstate(all="ignore"):
        out = _geval(e, pts, {})
    out = np.broadcast_to(out, (pts.shape[0],)).astype(float, copy=False)
    bad = ~np.isfinite(out)
    if bad.any():
        i = int(np.argmax(bad))
        raise DomainError(f"evaluation of {to_text(e)} is not finite at "
                          f"point {tuple(pts[i])}")
    return out


def _first_bad(pts: np.ndarray, mask: np.ndarray) -> tuple:
    i = int(np.argmax(mask))
    return tuple(pts[i])


def _geval(e: Expr, pts: np.ndarray, cache: dict):
    key = id(e)
    got = cache.get(key)
    if got is None:
        got = cache[key] = _geval_raw(e, pts, cache)
    return got


def _geval_raw(e: Expr, pts: np.ndarray, cache: dict):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        if e.index > pts.shape[1]:
            raise DomainError(f"points have no coordinate x{e.index}")
        return pts[:, e.index - 1]
    if isinstance(e, Add):
        return _geval(e.left, pts, cache) + _geval(e.right, pts, cache)
    if isinstance(e, Sub):
        return _geval(e.left, pts, cache) - _geval(e.right, pts, cache)
    if isinstance(e, Mul):
        return _geval(e.left, pts, cache) * _geval(e.right, pts, cache)
    if isinstance(e, Div):
        d = np.broadcast_to(_geval(e.den, pts, cache), (pts.shape[0],))
        zero = d == 0.0
        if zero.any():
            raise DomainError(f"division by zero in {to_text(e)} at point "
                              f"{_first_bad(pts, zero)}")
        return _geval(e.num, pts, cache) / d
    if isinstance(e, Pow):
        b = np.broadcast_to(_geval(e.base, pts, cache), (pts.shape[0],))
        if e.exponent < 0:
            zero = b == 0.0
            if zero.any():
                raise DomainError(f"zero base with negative exponent at point "
                                  f"{_first_bad(pts, zero)}")
        return b ** float(e.exponent)
    if isinstance(e, Neg):
        return -_geval(e.arg, pts, cache)
    if isinstance(e, Call):
        u = np.broadcast_to(_geval(e.arg, pts, cache), (pts.shape[0],))
        if e.fn == "sin":
            return np.sin(u)
        if e.fn == "cos":
            return np.cos(u)
        if e.fn == "exp":
            return np.exp(u)
        if e.fn == "log":
            bad = u <= 0.0
            if bad.any():
                raise DomainError(f"log of nonpositive value at point "
                                  f"{_first_bad(pts, bad)}")
            return np.log(u)
        if e.fn == "sqrt":
            bad = u < 0.0
            if bad.any():
                raise DomainError(f"sqrt of negative value at point "
                                  f"{_first_bad(pts, bad)}")
            return np.sqrt(u)
    if isinstance(e, Bump):
        t = np.broadcast_to(_geval(e.arg, pts, cache), (pts.shape[0],))
        out = np.zeros(pts.shape[0])
        s_all = 1.0 - t * t
        inside = s_all > 0.0
        if inside.any():
            ti = t[inside]
            s = s_all[inside]
            expo = -1.0 / s - 2.0 * e.order * np.log(s)
            coeffs = np.array(_bump_poly(e.order), dtype=float)
            p = np.zeros_like(ti)
            for c in coeffs[::-1]:
                p = p * ti + c
            vals = p * np.exp(np.maximum(expo, -745.0))
            vals[expo < -745.0] = 0.0
            out[inside] = vals
        return out
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# parsing and printing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)

_VAR = re.compile(r"x([1-9][0-9]*)$")
_BUMP = re.compile(r"bump([0-9]+)?$")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            toks.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", off)
        self.take()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.unary()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return neg(self.unary())
        return self.pow()

    def pow(self) -> Expr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.take()
            expo = self.unary()
            c = _const(expo)
            if c is None or c.denominator != 1:
                raise ParseError("exponent must be an integer constant", off)
            return power(base, int(c))
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "ident":
            nxt_kind, nxt_val, _ = self.peek()
            is_call = nxt_kind == "op" and nxt_val == "("
            m = _VAR.match(val)
            if m:
                if is_call:
                    raise ParseError(f"{val} is a variable, not a function", off)
                return Var(int(m.group(1)))
            b = _BUMP.match(val)
            if b:
                if not is_call:
                    raise ParseError(f"{val} needs an argument list", off)
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return bump(arg, int(b.group(1) or 0))
            if val in FUNCTIONS:
                if not is_call:
                    raise ParseError(f"{val} needs an argument list", off)
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return call(val, arg)
            raise ParseError(f"unknown name {val!r}", off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected {val!r}" if val else "unexpected end of input",
                         off)


def parse(text: str) -> Expr:
    """Parse the textual form.  Errors carry a character offset."""
    return _Parser(text).parse()


# precedence levels used by the printer
_P_ADD, _P_MUL, _P_UNARY, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _P_ADD
    if isinstance(e, (Mul, Div)):
        return _P_MUL
    if isinstance(e, Neg):
        return _P_UNARY
    if isinstance(e, Const) and e.value.denominator != 1:
        return _P_MUL  # prints as a quotient, whatever its sign
    if isinstance(e, Const) and e.value < 0:
        return _P_UNARY
    if isinstance(e, Pow):
        return _P_POW
    return _P_ATOM


def _fmt(e: Expr, ctx: int) -> str:
    s = _fmt_raw(e)
    if _prec(e) < ctx:
        return f"({s})"
    return s


def _fmt_raw(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        if v.denominator == 1:
            return str(v.numerator)
        if v < 0:
            return f"-{-v.numerator}/{v.denominator}"
        return f"{v.numerator}/{v.denominator}"
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Add):
        return f"{_fmt(e.left, _P_ADD)} + {_fmt(e.right, _P_MUL)}"
    if isinstance(e, Sub):
        return f"{_fmt(e.left, _P_ADD)} - {_fmt(e.right, _P_MUL)}"
    if isinstance(e, Mul):
        return f"{_fmt(e.left, _P_MUL)} * {_fmt(e.right, _P_UNARY)}"
    if isinstance(e, Div):
        return f"{_fmt(e.num, _P_MUL)} / {_fmt(e.den, _P_UNARY)}"
    if isinstance(e, Neg):
        return f"-{_fmt(e.arg, _P_UNARY)}"
    if isinstance(e, Pow):
        return f"{_fmt(e.base, _P_ATOM)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.fn}({_fmt_raw(e.arg)})"
    if isinstance(e, Bump):
        name = "bump" if e.order == 0 else f"bump{e.order}"
        return f"{name}({_fmt_raw(e.arg)})"
    raise ExprError(f"unknown node {e!r}")


def to_text(e: Expr) -> str:
    """Canonical textual form; parse(to_text(e)) == e."""
    return _fmt_raw(e)
