"""Expression trees for piecewise-smooth functions.

A function is a tree built from constants, coordinates, sums, products,
integer powers, exp/sin/cos, and the nonsmooth combiners max/min/abs.
Everything outside the combiners is smooth, so at any point the function
agrees locally with one of finitely many smooth "selection" branches; the
gradients of the active branches are what the subdifferential machinery
consumes.

Expressions also have a textual form (a prefix grammar, e.g.
``max(pow(sub(sq(x0),1),2),sq(x1))``) used by config files; see
:func:`parse_expr` and :func:`format_expr`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ExprParseError, UsageError

Point = np.ndarray

# Cross products of active branches are capped so a malformed input cannot
# blow up combinatorially.
_MAX_BRANCHES = 1024

_DEFAULT_ACTIVITY_SCALE = 1e-9


def as_point(x, dim: int | None = None) -> Point:
    """Coerce to a finite 1-D float vector, optionally checking its length."""
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise UsageError(f"point must be a 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise UsageError("point has non-finite coordinates")
    if dim is not None and p.size != dim:
        raise UsageError(f"point has dimension {p.size}, expected {dim}")
    return p


class Expr:
    """Base class; subclasses are frozen dataclasses, compared structurally."""

    def __add__(self, other):
        return sum_of(self, _as_expr(other))

    def __radd__(self, other):
        return sum_of(_as_expr(other), self)

    def __sub__(self, other):
        return sum_of(self, -_as_expr(other))

    def __rsub__(self, other):
        return sum_of(_as_expr(other), -self)

    def __mul__(self, other):
        return product_of(self, _as_expr(other))

    def __rmul__(self, other):
        return product_of(_as_expr(other), self)

    def __neg__(self):
        return product_of(Const(-1.0), self)

    def __pow__(self, p):
        return Power(self, p)

    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Coord(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise UsageError("coordinate index must be nonnegative")


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple

    def __post_init__(self):
        if len(self.terms) < 1:
            raise UsageError("sum needs at least one term")


@dataclass(frozen=True)
class Product(Expr):
    factors: tuple

    def __post_init__(self):
        if len(self.factors) < 1:
            raise UsageError("product needs at least one factor")


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, (int, np.integer)) or self.exponent < 1:
            raise UsageError(f"power exponent must be an integer >= 1, got {self.exponent!r}")
        object.__setattr__(self, "exponent", int(self.exponent))


_UNARY_FNS = {"exp": (np.exp, np.exp),
              "sin": (np.sin, np.cos),
              "cos": (np.cos, lambda v: -np.sin(v))}


@dataclass(frozen=True)
class Unary(Expr):
    fn: str
    child: Expr

    def __post_init__(self):
        if self.fn not in _UNARY_FNS:
            raise UsageError(f"unknown smooth unary {self.fn!r}")


@dataclass(frozen=True)
class Max(Expr):
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise UsageError("max needs at least two children")


@dataclass(frozen=True)
class Min(Expr):
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise UsageError("min needs at least two children")


@dataclass(frozen=True)
class Abs(Expr):
    child: Expr


# ---------------------------------------------------------------- builders

def _as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)):
        return Const(float(v))
    raise UsageError(f"cannot interpret {v!r} as an expression")


def const(v: float) -> Expr:
    return Const(float(v))


def coord(i: int) -> Expr:
    return Coord(i)


def sum_of(*terms) -> Expr:
    flat = []
    for t in map(_as_expr, terms):
        flat.extend(t.terms if isinstance(t, Sum) else (t,))
    return flat[0] if len(flat) == 1 else Sum(tuple(flat))


def product_of(*factors) -> Expr:
    flat = []
    for f in map(_as_expr, factors):
        flat.extend(f.factors if isinstance(f, Product) else (f,))
    return flat[0] if len(flat) == 1 else Product(tuple(flat))


def max_of(*children) -> Expr:
    return Max(tuple(map(_as_expr, children)))


def min_of(*children) -> Expr:
    return Min(tuple(map(_as_expr, children)))


def abs_of(child) -> Expr:
    return Abs(_as_expr(child))


def smooth(fn: str, child) -> Expr:
    return Unary(fn, _as_expr(child))


def arity(f: Expr) -> int:
    """Smallest input dimension the expression accepts (1 + highest coordinate)."""
    if isinstance(f, Coord):
        return f.index + 1
    if isinstance(f, Const):
        return 0
    kids = _children(f)
    return max((arity(k) for k in kids), default=0)


def _children(f: Expr) -> tuple:
    if isinstance(f, Sum):
        return f.terms
    if isinstance(f, Product):
        return f.factors
    if isinstance(f, (Max, Min)):
        return f.children
    if isinstance(f, Power):
        return (f.base,)
    if isinstance(f, (Unary, Abs)):
        return (f.child,)
    return ()


# ---------------------------------------------------------------- evaluation

def evaluate(f: Expr, x) -> float | np.ndarray:
    """Evaluate ``f`` at a point (1-D input) or a batch of points (N, n).

    Max/min nodes take the exact max/min of their children's values.  A
    non-finite result raises a usage error naming the offending subtree.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2:
        raise UsageError(f"expected a point or batch of points, got shape {np.shape(x)}")
    if X.shape[1] < arity(f):
        raise UsageError(
            f"dimension mismatch: expression needs {arity(f)} coordinates, point has {X.shape[1]}")
    vals = _eval(f, X)
    if not np.all(np.isfinite(vals)):
        bad = _locate_nonfinite(f, X)
        raise UsageError(f"non-finite value at subtree {format_expr(bad)}")
    return float(vals[0]) if single else vals


def _eval(f: Expr, X: np.ndarray) -> np.ndarray:
    if isinstance(f, Const):
        return np.full(X.shape[0], f.value)
    if isinstance(f, Coord):
        return X[:, f.index].copy()
    if isinstance(f, Sum):
        out = _eval(f.terms[0], X)
        for t in f.terms[1:]:
            out = out + _eval(t, X)
        return out
    if isinstance(f, Product):
        out = _eval(f.factors[0], X)
        for g in f.factors[1:]:
            out = out * _eval(g, X)
        return out
    if isinstance(f, Power):
        return _eval(f.base, X) ** f.exponent
    if isinstance(f, Unary):
        with np.errstate(over="ignore", invalid="ignore"):
            return _UNARY_FNS[f.fn][0](_eval(f.child, X))
    if isinstance(f, Max):
        return np.maximum.reduce([_eval(c, X) for c in f.children])
    if isinstance(f, Min):
        return np.minimum.reduce([_eval(c, X) for c in f.children])
    if isinstance(f, Abs):
        return np.abs(_eval(f.child, X))
    raise UsageError(f"unknown expression node {type(f).__name__}")


def _locate_nonfinite(f: Expr, X: np.ndarray) -> Expr:
    """Walk down to the smallest subtree that already evaluates non-finite."""
    for k in _children(f):
        with np.errstate(all="ignore"):
            if not np.all(np.isfinite(_eval(k, X))):
                return _locate_nonfinite(k, X)
    return f


# ---------------------------------------------------------------- active pieces

def active_pieces(f: Expr, x, activity_tol: float | None = None) -> np.ndarray:
    """Gradients of the smooth selection branches active at ``x``.

    Returns an (m, n) array, one row per active branch, duplicates removed in
    first-seen order.  A branch of a max/min/abs node counts as active when its
    value is within ``activity_tol`` of the attained value; with the default
    ``None`` the tolerance at each node is 1e-9 * (1 + |node value|).

    The convex hull of these rows equals the generalized gradient for
    max-of-smooth compositions and over-approximates it for mixed min/max
    nesting at the same point, which is the conservative direction for
    criticality tests.
    """
    p = as_point(x)
    if p.size < arity(f):
        raise UsageError(
            f"dimension mismatch: expression needs {arity(f)} coordinates, point has {p.size}")
    branches = _branches(f, p, activity_tol)
    grads = np.array([g for _, g in branches], dtype=float)
    # stable de-duplication of exactly repeated gradients
    seen: dict = {}
    for row in grads:
        seen.setdefault(row.tobytes(), row)
    return np.array(list(seen.values()), dtype=float)


def _node_tol(value: float, activity_tol: float | None) -> float:
    if activity_tol is not None:
        return float(activity_tol)
    return _DEFAULT_ACTIVITY_SCALE * (1.0 + abs(value))


def _branches(f: Expr, x: np.ndarray, tol) -> list:
    """List of (value, gradient) pairs for the active selections of ``f`` at x."""
    n = x.size
    if isinstance(f, Const):
        return [(f.value, np.zeros(n))]
    if isinstance(f, Coord):
        g = np.zeros(n)
        g[f.index] = 1.0
        return [(x[f.index], g)]
    if isinstance(f, Sum):
        acc = [(0.0, np.zeros(n))]
        for t in f.terms:
            acc = _cross(acc, _branches(t, x, tol), lambda a, b: (a[0] + b[0], a[1] + b[1]))
        return acc
    if isinstance(f, Product):
        acc = [(1.0, np.zeros(n))]
        for fac in f.factors:
            acc = _cross(acc, _branches(fac, x, tol),
                         lambda a, b: (a[0] * b[0], a[0] * b[1] + b[0] * a[1]))
        return acc
    if isinstance(f, Power):
        p = f.exponent
        return [(v ** p, p * v ** (p - 1) * g) for v, g in _branches(f.base, x, tol)]
    if isinstance(f, Unary):
        fn, dfn = _UNARY_FNS[f.fn]
        return [(float(fn(v)), float(dfn(v)) * g) for v, g in _branches(f.child, x, tol)]
    if isinstance(f, Abs):
        out = []
        for v, g in _branches(f.child, x, tol):
            t = _node_tol(abs(v), tol)
            if v >= -t:
                out.append((abs(v), g.copy()))
            if v <= t:
                out.append((abs(v), -g))
        return out
    if isinstance(f, (Max, Min)):
        vals = [float(_eval(c, x[None])[0]) for c in f.children]
        attained = max(vals) if isinstance(f, Max) else min(vals)
        t = _node_tol(attained, tol)
        out = []
        for c, v in zip(f.children, vals):
            if abs(v - attained) <= t:
                out.extend(_branches(c, x, tol))
        return out
    raise UsageError(f"unknown expression node {type(f).__name__}")


def _cross(a: list, b: list, combine) -> list:
    if len(a) * len(b) > _MAX_BRANCHES:
        raise UsageError("too many simultaneously active branches")
    return [combine(p, q) for p in a for q in b]


# ---------------------------------------------------------------- text form
#
# expr   := NUMBER | COORD | NAME '(' expr (',' expr)* ')'
# COORD  := 'x' digits
# NAME   := add sub mul neg pow sq abs max min exp sin cos
#
# pow takes an integer literal >= 1 as its second argument; sub(a,b) and
# neg(a) are sugar for adding (-1)-scaled terms, sq(a) for pow(a,2).

_TOKEN_RE = re.compile(r"\s*(?:(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                       r"|(?P<name>[A-Za-z_]\w*)"
                       r"|(?P<punct>[(),]))")


def _tokenize(text: str) -> list:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            tail = text[pos:].strip()
            if not tail:
                break
            bad = tail.split()[0]
            raise ExprParseError(f"unrecognized token {bad!r} at position {pos}", bad, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok is None:
            raise ExprParseError("unexpected end of expression", None, None)
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ExprParseError(f"unexpected token {tok[1]!r} at position {tok[2]}",
                                 tok[1], tok[2])
        self.i += 1
        return tok

    def expr(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                return Coord(int(m.group(1)))
            return self.call(text, pos)
        raise ExprParseError(f"unexpected token {text!r} at position {pos}", text, pos)

    def call(self, name: str, pos: int) -> Expr:
        self.take("punct", "(")
        args = [self.expr()]
        while self.peek() and self.peek()[1] == ",":
            self.take("punct", ",")
            args.append(self.expr())
        self.take("punct", ")")
        return self.build(name, args, pos)

    def build(self, name: str, args: list, pos: int) -> Expr:
        def need(k):
            if len(args) != k:
                raise ExprParseError(
                    f"{name!r} takes {k} argument(s), got {len(args)} at position {pos}",
                    name, pos)
        if name == "add":
            if len(args) < 2:
                raise ExprParseError(f"'add' needs >= 2 arguments at position {pos}", name, pos)
            return sum_of(*args)
        if name == "sub":
            need(2)
            return sum_of(args[0], -args[1])
        if name == "mul":
            if len(args) < 2:
                raise ExprParseError(f"'mul' needs >= 2 arguments at position {pos}", name, pos)
            return product_of(*args)
        if name == "neg":
            need(1)
            return -args[0]
        if name == "pow":
            need(2)
            e = args[1]
            if not isinstance(e, Const) or e.value != int(e.value) or e.value < 1:
                raise ExprParseError(
                    f"'pow' exponent must be an integer literal >= 1 at position {pos}",
                    name, pos)
            return Power(args[0], int(e.value))
        if name == "sq":
            need(1)
            return Power(args[0], 2)
        if name == "abs":
            need(1)
            return Abs(args[0])
        if name in ("max", "min"):
            if len(args) < 2:
                raise ExprParseError(f"{name!r} needs >= 2 arguments at position {pos}", name, pos)
            return (Max if name == "max" else Min)(tuple(args))
        if name in _UNARY_FNS:
            need(1)
            return Unary(name, args[0])
        raise ExprParseError(f"unknown function {name!r} at position {pos}", name, pos)


def parse_expr(text: str) -> Expr:
    """Parse the prefix grammar; raises :class:`ExprParseError` naming the bad token."""
    tokens = _tokenize(text)
    if not tokens:
        raise ExprParseError("empty expression", None, 0)
    p = _Parser(tokens)
    e = p.expr()
    if p.peek() is not None:
        tok = p.peek()
        raise ExprParseError(f"trailing input {tok[1]!r} at position {tok[2]}", tok[1], tok[2])
    return e


def format_expr(f: Expr) -> str:
    """Canonical text form; ``parse_expr(format_expr(f))`` reproduces ``f``."""
    if isinstance(f, Const):
        return repr(f.value)
    if isinstance(f, Coord):
        return f"x{f.index}"
    if isinstance(f, Sum):
        return "add(" + ",".join(map(format_expr, f.terms)) + ")"
    if isinstance(f, Product):
        if len(f.factors) == 2 and f.factors[0] == Const(-1.0):
            return "neg(" + format_expr(f.factors[1]) + ")"
        return "mul(" + ",".join(map(format_expr, f.factors)) + ")"
    if isinstance(f, Power):
        return f"pow({format_expr(f.base)},{f.exponent})"
    if isinstance(f, Unary):
        return f"{f.fn}({format_expr(f.child)})"
    if isinstance(f, Max):
        return "max(" + ",".join(map(format_expr, f.children)) + ")"
    if isinstance(f, Min):
        return "min(" + ",".join(map(format_expr, f.children)) + ")"
    if isinstance(f, Abs):
        return "abs(" + format_expr(f.child) + ")"
    raise UsageError(f"unknown expression node {type(f).__name__}")
