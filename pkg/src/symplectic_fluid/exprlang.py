"""A small expression language for user-supplied scalar fields.

Grammar (usual precedence, ``^`` binds tightest and associates right)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the coordinates ``t, x, y, z``, the constant ``pi`` and the
functions ``sin, cos, exp``.  Exponents must evaluate to integer constants.
"""
from __future__ import annotations

import math
import re

from .geometry import expr as ex

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^()]))")
_FUNCTIONS = {"sin": ex.sin, "cos": ex.cos, "exp": ex.exp}
_VARIABLES = {name: i for i, name in enumerate(ex.COORDINATE_NAMES)}
_CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    """Parse failure; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, text: str, position: int):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}: {text!r}")


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", text, bad)
        start = m.start(m.lastindex)
        number, name, op = m.groups()
        if number is not None:
            tokens.append(("num", float(number), start))
        elif name is not None:
            tokens.append(("name", name, start))
        else:
            tokens.append(("op", "^" if op == "**" else op, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionError(message, self.text, tok[2])

    def expect(self, op):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            self.fail(f"expected {op!r}", tok)

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected trailing input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            tok = self.take()
            rhs = self.unary()
            if tok[1] == "*":
                node = node * rhs
            else:
                if rhs.op == "const" and rhs.data == 0:
                    self.fail("division by zero", tok)
                node = node / rhs
        return node

    def unary(self):
        tok = self.peek()
        if tok[:2] == ("op", "-"):
            self.take()
            return -self.unary()
        if tok[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            tok = self.take()
            exponent = self.unary()
            if exponent.op != "const" or float(exponent.data) != int(exponent.data):
                self.fail("exponent must be an integer constant", tok)
            return ex.power(base, int(exponent.data))
        return base

    def atom(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            return ex.const(value)
        if kind == "name":
            if value in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCTIONS[value](arg)
            if value in _VARIABLES:
                return ex.var(_VARIABLES[value])
            if value in _CONSTANTS:
                return ex.const(_CONSTANTS[value])
            self.fail(f"unknown name {value!r}", tok)
        if tok[:2] == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of expression", tok)
        self.fail(f"unexpected {value!r}", tok)


def parse_expression(text: str) -> ex.Expr:
    """Parse ``text`` into a closed-form expression over (t, x, y, z)."""
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    return _Parser(text).parse()


def free_names(node: ex.Expr) -> set:
    return {ex.COORDINATE_NAMES[i] for i in node.free}
