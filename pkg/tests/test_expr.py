from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _graphs import random_element, random_graph
from graphtriple import algebra as alg
from graphtriple.expr import ExpressionError, parse_expression
from graphtriple.graph import loop_graph, parse_graph


def test_spec_style_expression():
    g = parse_graph("v v a b\ne e1: v -> a\ne e2: a -> b\ne e3: v -> b")
    a = parse_expression("S(e1 e2) * adj(S(e3)) + 2/3 * p(v)", g)
    expected = alg.term(g, "e1 e2", "e3") + alg.p(g, "v").scale(Fraction(2, 3))
    assert a == expected


def test_scalars_units_and_imaginary():
    g = loop_graph(1)
    assert parse_expression("one - p(v1) + S(e1)", g) == alg.one(g) - alg.p(g, "v1") + alg.S(g, "e1")
    assert parse_expression("2", g) == alg.one(g).scale(2)
    assert parse_expression("i * S(e1)", g) == alg.S(g, "e1").scale(alg.I)
    assert parse_expression("adj(i * S(e1))", g) == alg.S(g, "e1").adj.scale(-alg.I)
    assert parse_expression("-(p(v1))", g) == -alg.p(g, "v1")
    assert parse_expression("adj(2/3)", g) == alg.one(g).scale(Fraction(2, 3))


@pytest.mark.parametrize("text, pos", [
    ("", 0),
    ("p(v1", 0),
    ("p(zz)", 0),
    ("S()", 0),
    ("S(e1) +", 7),
    ("S(e1) $", 6),
    ("foo(v1)", 0),
    ("p(v1 v1)", 0),
    ("1/0", 0),
    ("(S(e1)", 6),
])
def test_errors_carry_positions(text, pos):
    with pytest.raises(ExpressionError) as exc:
        parse_expression(text, loop_graph(1))
    assert exc.value.position == pos


def test_bad_path_is_reported():
    g = parse_graph("v a b\ne x: a -> b\ne y: a -> b")
    with pytest.raises(ExpressionError):
        parse_expression("S(x y)", g)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31))
def test_string_form_round_trips(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 6, 10)
    a = random_element(rng, g, 5, 3, unit=True)
    assert parse_expression(str(a), g) == a
