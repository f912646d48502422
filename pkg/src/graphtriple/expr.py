"""Parser for algebra expressions such as ``S(e1 e2) * adj(S(e3)) + 2/3 * p(v)``.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary ("*" unary)*
    unary  := ("-" | "+") unary | atom
    atom   := NUMBER | "i" | "one" | "p(" vertex ")" | "S(" edge* ")"
            | "adj(" expr ")" | "(" expr ")"

``NUMBER`` is ``123`` or ``123/456``.  A bare scalar in a sum stands for that
multiple of the adjoined unit ``one``.  Errors carry a 0-based character
position.
"""

from __future__ import annotations

import re
from fractions import Fraction

from . import algebra as alg
from .graph import Graph, GraphError


class ExpressionError(ValueError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"at position {position}: {message}")


_NUMBER = re.compile(r"\d+(?:/\d+)?")
_WORD = re.compile(r"[A-Za-z_]\w*")


class _Parser:
    def __init__(self, text: str, graph: Graph):
        self.text = text
        self.graph = graph
        self.pos = 0

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.text[self.pos]) if self.pos < len(self.text) else "end of input"
            raise ExpressionError(f"expected {ch!r}, found {found}", self.pos)
        self.pos += 1

    def parse(self):
        if not self.text.strip():
            raise ExpressionError("empty expression", 0)
        value = self.expr()
        if self.peek():
            raise ExpressionError(f"unexpected {self.text[self.pos]!r}", self.pos)
        return _as_element(value, self.graph)

    def expr(self):
        value = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.term()
            value = _add(value, rhs if op == "+" else _neg(rhs), self.graph)
        return value

    def term(self):
        value = self.unary()
        while self.peek() == "*":
            self.pos += 1
            value = _mul(value, self.unary())
        return value

    def unary(self):
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return _neg(self.unary())
        if ch == "+":
            self.pos += 1
            return self.unary()
        return self.atom()

    def _raw_args(self, start: int) -> list[str]:
        self.expect("(")
        end = self.text.find(")", self.pos)
        if end < 0:
            raise ExpressionError("unclosed '('", start)
        inner = self.text[self.pos:end]
        self.pos = end + 1
        return inner.split()

    def atom(self):
        self.skip()
        start = self.pos
        if start >= len(self.text):
            raise ExpressionError("unexpected end of input", start)
        m = _NUMBER.match(self.text, start)
        if m:
            self.pos = m.end()
            try:
                return Fraction(m.group())
            except ZeroDivisionError:
                raise ExpressionError("zero denominator", start) from None
        if self.text[start] == "(":
            self.pos += 1
            value = self.expr()
            self.expect(")")
            return value
        m = _WORD.match(self.text, start)
        if not m:
            raise ExpressionError(f"unexpected {self.text[start]!r}", start)
        word = m.group()
        self.pos = m.end()
        if word == "i":
            return alg.I
        if word == "one":
            return alg.one(self.graph)
        if word == "adj":
            self.expect("(")
            value = self.expr()
            self.expect(")")
            if isinstance(value, alg.Element):
                return alg.adjoint(value)
            return alg.conj(value)
        if word in ("p", "S"):
            args = self._raw_args(start)
            try:
                if word == "p":
                    if len(args) != 1:
                        raise ExpressionError("p(...) takes exactly one vertex", start)
                    return alg.p(self.graph, args[0])
                if not args:
                    raise ExpressionError("S(...) needs at least one edge", start)
                return alg.S(self.graph, args)
            except GraphError as exc:
                raise ExpressionError(str(exc), start) from None
        raise ExpressionError(f"unknown name {word!r}", start)


def _is_scalar(x) -> bool:
    return not isinstance(x, alg.Element)


def _as_element(x, graph):
    return x if isinstance(x, alg.Element) else alg.one(graph).scale(x)


def _neg(x):
    return -x


def _add(a, b, graph):
    if _is_scalar(a) and _is_scalar(b):
        return alg.coeff(a + b)
    return _as_element(a, graph) + _as_element(b, graph)


def _mul(a, b):
    if _is_scalar(a) and _is_scalar(b):
        return alg.coeff(a * b)
    if _is_scalar(a):
        return b.scale(a)
    if _is_scalar(b):
        return a.scale(b)
    return alg.multiply(a, b)


def parse_expression(text: str, graph: Graph) -> alg.Element:
    return _Parser(text, graph).parse()
