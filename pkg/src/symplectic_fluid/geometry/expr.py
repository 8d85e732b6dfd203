"""Closed-form scalar fields on space-time as a hash-consed expression DAG.

Expressions are kept in a light canonical form (sums as coefficient maps,
products as exponent maps) so that identical subexpressions are shared and
factors such as ``rho * rho**-1`` cancel on construction.  Partial
derivatives are exact and memoized per node; evaluation walks the DAG once,
in topological order, releasing intermediate arrays as soon as their last
consumer has been computed.
"""
from __future__ import annotations

import itertools
import math
import weakref
from typing import Iterable, Sequence

import numpy as np

COORDINATE_NAMES = ("t", "x", "y", "z")

_counter = itertools.count()
_intern: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


class Expr:
    """Immutable node of a scalar expression in the coordinates (t, x, y, z)."""

    __slots__ = ("op", "args", "data", "uid", "free", "_d", "__weakref__")

    def __init__(self, op, args, data, free):
        self.op = op
        self.args = args
        self.data = data
        self.uid = next(_counter)
        self.free = free
        self._d = {}

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, e):
        return power(self, e)

    def diff(self, axis: int) -> "Expr":
        """Exact partial derivative along coordinate ``axis`` (0=t .. 3=z)."""
        got = self._d.get(axis)
        if got is None:
            got = _derivative(self, axis)
            self._d[axis] = got
        return got

    @property
    def is_constant(self) -> bool:
        return self.op == "const"

    def __repr__(self):
        return f"Expr<{to_string(self)}>"

    def __hash__(self):
        return self.uid

    def __eq__(self, other):
        return self is other


def _make(key, op, args, data):
    node = _intern.get(key)
    if node is None:
        free = frozenset().union(*(a.free for a in args)) if args else frozenset()
        if op == "var":
            free = frozenset((data,))
        node = Expr(op, args, data, free)
        _intern[key] = node
    return node


def const(value: float) -> Expr:
    value = float(value)
    if value == 0.0:
        value = 0.0  # folds -0.0
    return _make(("const", value), "const", (), value)


def var(axis: int) -> Expr:
    return _make(("var", axis), "var", (), axis)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return const(value)
    raise TypeError(f"cannot use {type(value).__name__} as a closed-form field")


ZERO = None  # assigned after definitions
ONE = None


# -- canonical sums --------------------------------------------------------
def _sum_parts(node: Expr):
    """(constant, {term: coefficient}) view of ``node``."""
    if node.op == "const":
        return node.data, {}
    if node.op == "add":
        return node.data[0], dict(zip(node.args, node.data[1]))
    return 0.0, {node: 1.0}


def _build_sum(constant: float, terms: dict) -> Expr:
    items = [(t, c) for t, c in terms.items() if c != 0.0]
    if not items:
        return const(constant)
    if constant == 0.0 and len(items) == 1 and items[0][1] == 1.0:
        return items[0][0]
    items.sort(key=lambda tc: tc[0].uid)
    args = tuple(t for t, _ in items)
    coefs = tuple(c for _, c in items)
    key = ("add", constant, tuple(t.uid for t in args), coefs)
    return _make(key, "add", args, (constant, coefs))


def add(*operands) -> Expr:
    constant = 0.0
    terms: dict = {}
    for op in operands:
        c, ts = _sum_parts(as_expr(op))
        constant += c
        for t, k in ts.items():
            terms[t] = terms.get(t, 0.0) + k
    return _build_sum(constant, terms)


# -- canonical products ----------------------------------------------------
def _scaled(node: Expr, factor: float) -> Expr:
    if factor == 1.0:
        return node
    if factor == 0.0:
        return const(0.0)
    c, ts = _sum_parts(node)
    return _build_sum(c * factor, {t: k * factor for t, k in ts.items()})


def _product_parts(node: Expr):
    """(coefficient, {base: exponent}) view of a non-constant ``node``."""
    if node.op == "add" and node.data[0] == 0.0 and len(node.args) == 1:
        inner_c, inner = _product_parts(node.args[0])
        return node.data[1][0] * inner_c, inner
    if node.op == "mul":
        return 1.0, dict(zip(node.args, node.data))
    return 1.0, {node: 1}


def _build_product(coef: float, factors: dict) -> Expr:
    items = [(b, e) for b, e in factors.items() if e != 0]
    if not items:
        return const(coef)
    if len(items) == 1 and items[0][1] == 1:
        base = items[0][0]
    else:
        items.sort(key=lambda be: be[0].uid)
        args = tuple(b for b, _ in items)
        exps = tuple(e for _, e in items)
        key = ("mul", tuple(b.uid for b in args), exps)
        base = _make(key, "mul", args, exps)
    return _scaled(base, coef)


def mul(*operands) -> Expr:
    coef = 1.0
    factors: dict = {}
    for op in operands:
        node = as_expr(op)
        if node.op == "const":
            coef *= node.data
            continue
        c, fs = _product_parts(node)
        coef *= c
        for b, e in fs.items():
            factors[b] = factors.get(b, 0) + e
    if coef == 0.0:
        return const(0.0)
    return _build_product(coef, factors)


def power(base, exponent: int) -> Expr:
    if int(exponent) != exponent:
        raise ValueError("only integer powers are supported")
    exponent = int(exponent)
    node = as_expr(base)
    if node.op == "const":
        if node.data == 0.0 and exponent < 0:
            raise ZeroDivisionError("division by the zero expression")
        return const(node.data ** exponent)
    if exponent == 0:
        return const(1.0)
    c, fs = _product_parts(node)
    return _build_product(c ** exponent, {b: e * exponent for b, e in fs.items()})


# -- elementary functions --------------------------------------------------
def _unary(op: str, fn, arg) -> Expr:
    node = as_expr(arg)
    if node.op == "const":
        return const(fn(node.data))
    return _make((op, node.uid), op, (node,), None)


def sin(arg) -> Expr:
    return _unary("sin", math.sin, arg)


def cos(arg) -> Expr:
    return _unary("cos", math.cos, arg)


def exp(arg) -> Expr:
    return _unary("exp", math.exp, arg)


ZERO = const(0.0)
ONE = const(1.0)


def _derivative(node: Expr, axis: int) -> Expr:
    if axis not in node.free:
        return ZERO
    op = node.op
    if op == "var":
        return ONE
    if op == "add":
        return add(*(mul(c, t.diff(axis)) for t, c in zip(node.args, node.data[1])))
    if op == "mul":
        pieces = []
        exps = dict(zip(node.args, node.data))
        for b, e in exps.items():
            db = b.diff(axis)
            if db.op == "const" and db.data == 0.0:
                continue
            lowered = dict(exps)
            lowered[b] = e - 1
            pieces.append(mul(_build_product(float(e), lowered), db))
        return add(*pieces)
    (a,) = node.args
    da = a.diff(axis)
    if op == "sin":
        return mul(cos(a), da)
    if op == "cos":
        return mul(sin(a), da, -1.0)
    if op == "exp":
        return mul(node, da)
    raise AssertionError(op)


# -- evaluation ------------------------------------------------------------
def _toposort(roots: Sequence[Expr]):
    order = []
    seen = set()
    for root in roots:
        if root.uid in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.uid in seen:
                continue
            seen.add(node.uid)
            stack.append((node, True))
            for a in node.args:
                if a.uid not in seen:
                    stack.append((a, False))
    return order


def evaluate_many(exprs: Sequence, coords: Sequence[np.ndarray]) -> list:
    """Evaluate expressions at broadcastable coordinate arrays ``(t, x, y, z)``.

    Results keep the broadcast shape their free coordinates imply; callers
    broadcast to the full grid.
    """
    roots = [as_expr(e) for e in exprs]
    order = _toposort(roots)
    pending = {}
    for node in order:
        for a in node.args:
            pending[a.uid] = pending.get(a.uid, 0) + 1
    keep = {r.uid for r in roots}
    values: dict = {}
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for node in order:
            values[node.uid] = _eval_node(node, values, coords)
            for a in node.args:
                pending[a.uid] -= 1
                if pending[a.uid] == 0 and a.uid not in keep:
                    del values[a.uid]
    return [values[r.uid] for r in roots]


def _eval_node(node: Expr, values, coords):
    op = node.op
    if op == "const":
        return np.float64(node.data)
    if op == "var":
        return coords[node.data]
    if op == "add":
        constant, coefs = node.data
        acc = None
        for t, c in zip(node.args, coefs):
            v = values[t.uid]
            term = v if c == 1.0 else (-v if c == -1.0 else c * v)
            acc = term if acc is None else acc + term
        return acc + constant if constant != 0.0 else acc
    if op == "mul":
        acc = None
        denom = None
        for b, e in zip(node.args, node.data):
            v = values[b.uid]
            p = v if abs(e) == 1 else v ** abs(e)
            if e > 0:
                acc = p if acc is None else acc * p
            else:
                denom = p if denom is None else denom * p
        if denom is None:
            return acc
        return 1.0 / denom if acc is None else acc / denom
    v = values[node.args[0].uid]
    if op == "sin":
        return np.sin(v)
    if op == "cos":
        return np.cos(v)
    if op == "exp":
        return np.exp(v)
    raise AssertionError(op)


def count_nodes(exprs: Iterable) -> int:
    return len(_toposort([as_expr(e) for e in exprs]))


def to_string(node: Expr, depth: int = 6) -> str:
    if depth == 0:
        return "..."
    op = node.op
    if op == "const":
        return repr(node.data)
    if op == "var":
        return COORDINATE_NAMES[node.data]
    if op == "add":
        parts = [f"{c!r}*{to_string(t, depth - 1)}" for t, c in zip(node.args, node.data[1])]
        if node.data[0]:
            parts.insert(0, repr(node.data[0]))
        return "(" + " + ".join(parts) + ")"
    if op == "mul":
        return "*".join(
            f"{to_string(b, depth - 1)}" + ("" if e == 1 else f"^{e}")
            for b, e in zip(node.args, node.data)
        )
    return f"{op}({to_string(node.args[0], depth - 1)})"
