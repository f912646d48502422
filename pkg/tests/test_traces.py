from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from _graphs import random_element, random_faithful_graph, random_graph, random_trace
from _oracles import tau_definition
from graphtriple import algebra as alg
from graphtriple.graph import ends, fryingpan_graph, load_graph, loop_graph, parse_graph, paths_into
from graphtriple.traces import (FAITHFUL, INFINITE_PATHS, LOOP_WITH_EXIT, NONE, GraphTrace,
                                TraceError, check_graph_trace, construct_from_ends, in_solution_space,
                                inner_product, necessary_conditions, parse_trace, solve_graph_traces,
                                tau, term_inner)

GRAPHS = Path(__file__).resolve().parent.parent / "graphs"
seeds = st.integers(0, 2**31)


def _positive_trace_exists(graph) -> bool:
    """LP oracle: maximise t subject to the trace equations, x_v >= t and sum x <= 1."""
    n = len(graph.vertices)
    rows = []
    for v in graph.vertices:
        if graph.is_sink(v):
            continue
        row = np.zeros(n + 1)
        row[graph.index[v]] += 1
        for e in graph.out_edges[v]:
            row[graph.index[e.range]] -= 1
        rows.append(row)
    A_ub = [np.r_[-np.eye(n)[i], 1.0] for i in range(n)] + [np.r_[np.ones(n), 0.0]]
    b_ub = [0.0] * n + [1.0]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=A_ub, b_ub=b_ub,
                  A_eq=rows or None, b_eq=[0.0] * len(rows) if rows else None,
                  bounds=[(0, None)] * (n + 1), method="highs")
    return res.status == 0 and -res.fun > 1e-9


def test_parse_trace():
    g = load_graph(str(GRAPHS / "fork.g"))
    tr = parse_trace((GRAPHS / "fork.t").read_text(), g)
    assert tr.values == {"v": 2, "s": 1, "c": 1}
    assert check_graph_trace(g, tr).valid
    for bad, line in [("t v 1\nt v 2", 2), ("t q 1", 1), ("t v x", 1), ("t v -1", 1), ("x v 1", 1)]:
        with pytest.raises(TraceError) as exc:
            parse_trace(bad, g)
        assert exc.value.line == line
    with pytest.raises(TraceError):
        parse_trace("t v 1", g)


def test_check_reports_violations():
    g = parse_graph("v v w\ne x: v -> w")
    tr = GraphTrace.from_mapping(g, {"v": 2, "w": 1})
    chk = check_graph_trace(g, tr)
    assert not chk.valid and chk.violations[0].vertex == "v" and chk.violations[0].successor_sum == 1
    # sinks impose no equation
    assert check_graph_trace(g, GraphTrace.from_mapping(g, {"v": 3, "w": 3})).valid


def test_solver_examples():
    sol = solve_graph_traces(loop_graph(1))
    assert sol.status == FAITHFUL and sol.witness.values == {"v1": 1}
    sol = solve_graph_traces(load_graph(str(GRAPHS / "loopexit.g")))
    assert sol.status == NONE and sol.obstruction == LOOP_WITH_EXIT and sol.witness is None
    sol = solve_graph_traces(load_graph(str(GRAPHS / "diamond_cycle.g")))
    assert sol.status == NONE and INFINITE_PATHS in sol.obstructions.tags
    sol = solve_graph_traces(load_graph(str(GRAPHS / "diamond_sink.g")))
    assert sol.status == FAITHFUL and sol.witness.values == {"v": 2, "a": 1, "b": 1, "w": 1}
    sol = solve_graph_traces(fryingpan_graph(3, 6))
    assert sol.status == FAITHFUL and set(sol.witness.values.values()) == {1}


def test_two_ends_span_a_two_dimensional_space():
    g = load_graph(str(GRAPHS / "fork.g"))
    sol = solve_graph_traces(g)
    assert sol.status == FAITHFUL and len(sol.basis) == 2 and len(sol.nonnegative) == 2
    assert sol.witness.values == {"v": 2, "s": 1, "c": 1}


def test_construct_from_ends_examples():
    g = load_graph(str(GRAPHS / "fork.g"))
    (sink,) = [e for e in ends(g) if e.kind == "sink"]
    tr = construct_from_ends(g, {sink: 3, "c": 2})
    assert tr.values == {"v": 5, "s": 3, "c": 2}
    with pytest.raises(TraceError):
        construct_from_ends(g, {"v": 1})
    with pytest.raises(TraceError):
        construct_from_ends(load_graph(str(GRAPHS / "loopexit.g")))


def test_end_representative_does_not_matter():
    # a 3-loop entered at two different vertices
    g = parse_graph("v x c0 c1 c2\ne a: x -> c0\ne b: x -> c2\n"
                    "e l0: c0 -> c1\ne l1: c1 -> c2\ne l2: c2 -> c0")
    (end,) = ends(g)
    counts = set()
    for rep in end.vertices:
        tr = construct_from_ends(g, {rep: 1})
        counts.add(tr.values["x"])
    assert counts == {2}


def test_tau_and_inner_examples():
    g = loop_graph(2)
    tr = GraphTrace.constant(g, 3)
    assert tau(alg.term(g, "e1", "e1"), tr) == 3
    assert tau(alg.S(g, "e1"), tr) == 0
    assert inner_product(alg.S(g, "e1"), alg.S(g, "e1"), tr) == 3
    assert inner_product(alg.S(g, "e1"), alg.S(g, "e2"), tr) == 0
    with pytest.raises(TraceError):
        tau(alg.one(g), tr)


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_solver_against_oracles(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 6, 9)
    sol = solve_graph_traces(g)
    n = len(g.vertices)
    rows = [[sympy.Integer(int(x)) for x in r] for r in
            [[(1 if j == g.index[v] else 0) - sum(1 for e in g.out_edges[v] if g.index[e.range] == j)
              for j in range(n)] for v in g.vertices if not g.is_sink(v)]]
    expected_dim = n - (sympy.Matrix(rows).rank() if rows else 0)
    assert len(sol.basis) == expected_dim
    for b in sol.basis:
        assert check_graph_trace(g, GraphTrace(tuple((v, x) for v, x in zip(g.vertices, b)))).valid \
            or any(x < 0 for x in b)
    exists = _positive_trace_exists(g)
    assert (sol.status == FAITHFUL) == exists
    assert sol.status in (FAITHFUL, NONE)
    if sol.status == FAITHFUL:
        assert check_graph_trace(g, sol.witness).valid and sol.witness.faithful
        assert min(sol.witness.values.values()) == 1
        assert in_solution_space(sol, sol.witness)
    if necessary_conditions(g).obstructed:
        assert sol.status != FAITHFUL


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_construction_from_ends_lies_in_solution_space(seed):
    rng = random.Random(seed)
    g = random_faithful_graph(rng)
    tr = random_trace(rng, g)
    assert check_graph_trace(g, tr).valid and tr.faithful
    sol = solve_graph_traces(g)
    assert sol.status == FAITHFUL
    assert in_solution_space(sol, tr)
    assert len(sol.basis) == len(ends(g))


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_trace_property_and_gauge_invariance(seed):
    rng = random.Random(seed)
    g = random_faithful_graph(rng)
    tr = random_trace(rng, g)
    a = random_element(rng, g, 4, 3)
    b = random_element(rng, g, 4, 3)
    assert tau(a * b, tr) == tau(b * a, tr)
    assert tau(a, tr) == tau(alg.expectation(a), tr) == tau_definition(a, tr.values)
    x, y = random_element(rng, g, 3, 2), random_element(rng, g, 3, 2)
    assert inner_product(x, y, tr) == alg.conj(inner_product(y, x, tr))
    norm = inner_product(x, x, tr)
    assert isinstance(norm, Fraction) and norm >= 0
    for kx in x.terms:
        for ky in y.terms:
            direct = inner_product(alg.from_terms(g, [(kx, 1)]), alg.from_terms(g, [(ky, 1)]), tr)
            assert term_inner(kx, ky, tr.values) == direct


def test_trace_values_on_loop_vertices_are_path_counts():
    g = fryingpan_graph(2, 4)
    tr = construct_from_ends(g)
    for v in g.vertices:
        if v.startswith("t"):
            # one path from each tail vertex into the loop
            assert tr.values[v] == 1
    assert len(paths_into(g, "v1", 3)) >= 1
