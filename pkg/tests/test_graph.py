from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _graphs import random_graph
from graphtriple.graph import (INFINITE, GraphError, count_vw_paths, fryingpan_graph, graph_report,
                               load_graph, loop_graph, parse_graph, paths_at_most, paths_from,
                               paths_into, simple_loops)


def test_parse_smallest_loop_graph():
    g = parse_graph("v v; e: v -> v")
    assert g.vertices == ("v",)
    assert len(g.edges) == 1 and g.edges[0].source == g.edges[0].range == "v"


def test_parse_comments_whitespace_and_ids():
    g = parse_graph("# header\n  v a   b\ne x : a->b   # trailing\n\ne: b -> a\n")
    assert [e.id for e in g.edges] == ["x", "e1"]
    assert g.edge["e1"].source == "b"


def test_auto_ids_skip_taken():
    g = parse_graph("v a\ne e1: a -> a\ne: a -> a")
    assert [e.id for e in g.edges] == ["e1", "e2"]


@pytest.mark.parametrize("text, line", [
    ("v a\ne x: a -> b", 2),
    ("v a a", 1),
    ("v a\ne x: a -> a\ne x: a -> a", 3),
    ("v a\nq a", 2),
    ("v a\ne x a -> a", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(GraphError) as exc:
        parse_graph(text)
    assert exc.value.line == line


def test_fryingpan_shape():
    for n, t in [(1, 3), (2, 3), (5, 6)]:
        g = fryingpan_graph(n, t)
        assert len(g.vertices) == n + t and len(g.edges) == n + t
        rep = graph_report(g)
        assert rep.sources == ("t1",) and rep.truncation_heads == ("t1",)
        assert len(rep.loops) == 1 and not rep.loops[0].has_exit
        assert len(rep.ends) == 1 and rep.ends[0].kind == "loop"


def test_generators():
    assert load_graph("@loop:4") == loop_graph(4)
    assert load_graph("@fryingpan:2,3") == fryingpan_graph(2, 3)
    for bad in ("@loop:0", "@loop:2,3", "@fryingpan:2", "@pan:1", "no/such/file.g"):
        with pytest.raises(GraphError):
            load_graph(bad)


def test_graph_report_examples():
    rep = graph_report(loop_graph(1))
    assert rep.sinks == () and rep.sources == () and len(rep.loops) == 1 and len(rep.ends) == 1
    assert rep.no_sources
    rep = graph_report(parse_graph("v a"))
    assert rep.sinks == ("a",) and rep.sources == ("a",) and rep.loops == () and len(rep.ends) == 1


def test_paths_examples():
    circle = loop_graph(1)
    assert [p.edges for p in paths_from(circle, "v1", 3)] == [("e1", "e1", "e1")]
    tree = parse_graph("v r a b\ne x: r -> a\ne y: r -> b")
    assert len(paths_from(tree, "r", 1)) == 2
    pan = fryingpan_graph(2, 3)
    assert len(paths_from(pan, "v1", 5)) == 1
    assert len(paths_into(pan, "v1", 1)) == 2
    assert pan.count_into("v1", 1) == 2
    assert paths_into(tree, "r", 1) == []
    for k in range(6):
        assert circle.count_into("v1", k) == 1


def test_paths_at_most_examples():
    g = parse_graph("v v s\ne x: v -> s")
    assert [p.edges for p in paths_at_most(g, "v", 3)] == [("x",)]
    assert [p.edges for p in paths_at_most(loop_graph(1), "v1", 3)] == [("e1",) * 3]
    g = parse_graph("v v s c\ne vs: v -> s\ne vc: v -> c\ne cc: c -> c")
    assert sorted(p.edges for p in paths_at_most(g, "v", 2)) == [("vc", "cc"), ("vs",)]


def _first_arrival_counts(g, v, w, max_len):
    """Brute force: first-arrival paths v -> w with at most ``max_len`` edges."""
    if v == w:
        return 1
    total = 0
    frontier = {v: 1}
    for _ in range(max_len):
        nxt: dict = {}
        for u, mult in frontier.items():
            for e in g.out_edges[u]:
                if e.range == w:
                    total += mult
                else:
                    nxt[e.range] = nxt.get(e.range, 0) + mult
        frontier = nxt
    return total


def test_count_vw_examples():
    g = parse_graph("v v w\ne x: v -> w")
    assert count_vw_paths(g, "v", "w") == 1
    assert count_vw_paths(parse_graph("v v w"), "v", "w") == 0
    # v enters the loop at c, which exits to w
    g = parse_graph("v v c w\ne x: v -> c\ne l: c -> c\ne y: c -> w")
    assert count_vw_paths(g, "v", "w") == INFINITE
    assert _first_arrival_counts(g, "v", "w", 10) < _first_arrival_counts(g, "v", "w", 20)
    assert count_vw_paths(loop_graph(1), "v1", "v1") == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_count_vw_matches_brute_force(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 6, 9)
    for v in g.vertices:
        for w in g.vertices:
            c = count_vw_paths(g, v, w)
            n = len(g.vertices)
            short = _first_arrival_counts(g, v, w, 2 * n + 2)
            longer = _first_arrival_counts(g, v, w, 4 * n + 4)
            if c == INFINITE:
                assert longer > short
            else:
                assert c == short == longer


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_path_counts_two_ways(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 8, 12)
    A = np.array(g.adjacency(), dtype=object)
    power = np.identity(len(g.vertices), dtype=object)
    for n in range(6):
        for v in g.vertices:
            i = g.index[v]
            assert len(paths_from(g, v, n)) == sum(power[i, :]) == g.count_from(v, n)
            assert len(paths_into(g, v, n)) == sum(power[:, i]) == g.count_into(v, n)
        power = power.dot(A)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_path_invariants(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 7, 12)
    for v in g.vertices:
        if g.in_edges[v]:
            for k in range(1, 5):
                assert g.count_into(v, k) == sum(g.count_into(e.source, k - 1) for e in g.in_edges[v])
        for p in paths_from(g, v, 3):
            for q in paths_from(g, p.range, 2):
                r = p.then(q)
                assert len(r) == len(p) + len(q) and r.source == p.source and r.range == q.range
                assert p.is_prefix_of(r) and p.remainder(r) == q


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_loops_are_canonical_and_exits_correct(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 6, 9)
    for lp in simple_loops(g):
        assert lp.edges == min(lp.edges[i:] + lp.edges[:i] for i in range(len(lp.edges)))
        for a, b in zip(lp.edges, lp.edges[1:] + lp.edges[:1]):
            assert g.edge[a].range == g.edge[b].source
        assert len(set(lp.vertices)) == len(lp.vertices)
        if not lp.has_exit:
            assert all(len(g.out_edges[v]) == 1 for v in lp.vertices)
