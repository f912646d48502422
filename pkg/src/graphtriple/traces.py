"""Graph traces: checking, obstructions, solving and construction from ends.

A graph trace assigns ``g(v) >= 0`` to each vertex with
``g(v) = sum_{s(e)=v} g(r(e))`` at every vertex that is *not a sink*.  Sinks
impose no equation: read literally the empty sum would force ``g = 0`` on
every sink, which would rule out the positive sink weights used when
building traces from ends.

It induces ``tau_g(S_mu S_nu^*) = [mu == nu] g(r(mu))`` and the inner
product ``<x, y> = tau_g(x^* y)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Mapping

from . import algebra as alg
from . import linalg
from .graph import INFINITE, End, Graph, Loop, count_paths_to_set, ends, simple_loops

LOOP_WITH_EXIT = "loop with exit"
INFINITE_PATHS = "infinitely many paths"
INFINITE_PATHS_TO_END = "infinitely many paths to an end"


class TraceError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class GraphTrace:
    """Vertex weights, stored in the graph's vertex order."""

    items: tuple[tuple[str, Fraction], ...]

    @classmethod
    def from_mapping(cls, graph: Graph, values: Mapping[str, object]) -> "GraphTrace":
        missing = [v for v in graph.vertices if v not in values]
        if missing:
            raise TraceError(f"no value for vertices {', '.join(missing)}")
        extra = [v for v in values if v not in graph.index]
        if extra:
            raise TraceError(f"unknown vertices {', '.join(map(str, extra))}")
        vals = []
        for v in graph.vertices:
            q = Fraction(values[v])
            if q < 0:
                raise TraceError(f"negative value at {v}")
            vals.append((v, q))
        return cls(tuple(vals))

    @classmethod
    def constant(cls, graph: Graph, c=1) -> "GraphTrace":
        return cls.from_mapping(graph, {v: c for v in graph.vertices})

    @property
    def values(self) -> dict[str, Fraction]:
        return dict(self.items)

    def __getitem__(self, v: str) -> Fraction:
        return self.values[v]

    @property
    def faithful(self) -> bool:
        return all(q > 0 for _, q in self.items)

    def scaled(self, c) -> "GraphTrace":
        c = Fraction(c)
        return GraphTrace(tuple((v, q * c) for v, q in self.items))

    def to_json(self) -> dict:
        return {v: alg.format_rational(q) for v, q in self.items}


def parse_trace(text: str, graph: Graph) -> GraphTrace:
    """Parse ``t <vertex> <rational>`` lines; every vertex needs a value."""
    values: dict[str, Fraction] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for stmt in line.split(";"):
            parts = stmt.split()
            if not parts:
                continue
            if parts[0] != "t" or len(parts) != 3:
                raise TraceError(f"malformed trace statement {stmt.strip()!r}", lineno)
            v, raw = parts[1], parts[2]
            if v not in graph.index:
                raise TraceError(f"unknown vertex {v!r}", lineno)
            if v in values:
                raise TraceError(f"duplicate value for {v!r}", lineno)
            try:
                q = Fraction(raw)
            except (ValueError, ZeroDivisionError):
                raise TraceError(f"not a rational: {raw!r}", lineno) from None
            if q < 0:
                raise TraceError(f"negative value at {v!r}", lineno)
            values[v] = q
    return GraphTrace.from_mapping(graph, values)


def load_trace(path: str, graph: Graph) -> GraphTrace:
    try:
        text = FsPath(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TraceError(f"cannot read trace file {path!r}: {exc.strerror}") from None
    return parse_trace(text, graph)


# checking ------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    vertex: str
    value: Fraction
    successor_sum: Fraction


@dataclass(frozen=True)
class TraceCheck:
    valid: bool
    violations: tuple[Violation, ...]

    def __bool__(self):
        return self.valid


def check_graph_trace(graph: Graph, tr: GraphTrace) -> TraceCheck:
    vals = tr.values
    missing = [v for v in graph.vertices if v not in vals]
    if missing:
        raise TraceError(f"no value for vertices {', '.join(missing)}")
    bad = []
    for v in graph.vertices:
        if graph.is_sink(v):
            continue
        rhs = sum((vals[e.range] for e in graph.out_edges[v]), Fraction(0))
        if vals[v] != rhs:
            bad.append(Violation(v, vals[v], rhs))
    return TraceCheck(not bad, tuple(bad))


# obstructions ----------------------------------------------------------------

@dataclass(frozen=True)
class NecessaryConditions:
    """Obstructions to a faithful graph trace; any flag rules one out."""

    loops_with_exit: tuple[Loop, ...]
    infinite_pairs: tuple[tuple[str, str], ...]
    infinite_to_end: tuple[tuple[str, End], ...]

    @property
    def tags(self) -> list[str]:
        out = []
        if self.loops_with_exit:
            out.append(LOOP_WITH_EXIT)
        if self.infinite_pairs:
            out.append(INFINITE_PATHS)
        if self.infinite_to_end:
            out.append(INFINITE_PATHS_TO_END)
        return out

    @property
    def obstructed(self) -> bool:
        return bool(self.tags)

    def to_json(self) -> dict:
        return {
            "tags": self.tags,
            "loops_with_exit": [list(lp.edges) for lp in self.loops_with_exit],
            "infinite_pairs": [list(p) for p in self.infinite_pairs],
            "infinite_to_end": [{"vertex": v, "end": list(e.vertices)} for v, e in self.infinite_to_end],
        }


def necessary_conditions(graph: Graph) -> NecessaryConditions:
    """Flag loops with exits and vertex pairs / ends with infinitely many paths.

    Paths are counted up to first arrival.  In a finite graph an infinite
    family of such paths needs a cycle that avoids the target yet leads to
    it, so every (b) or (c) flag comes with an (a) flag; the separate tags
    say which mechanism was seen.
    """
    loops = tuple(lp for lp in simple_loops(graph) if lp.has_exit)
    pairs = []
    to_end = []
    if loops:
        for v in graph.vertices:
            for w in graph.vertices:
                if count_paths_to_set(graph, v, [w]) == INFINITE:
                    pairs.append((v, w))
        for v in graph.vertices:
            for end in ends(graph):
                if count_paths_to_set(graph, v, end.vertices) == INFINITE:
                    to_end.append((v, end))
    return NecessaryConditions(loops, tuple(pairs), tuple(to_end))


# solving ---------------------------------------------------------------------

FAITHFUL = "faithful-witness"
ONLY_DEGENERATE = "only-degenerate"
NONE = "none"


@dataclass(frozen=True)
class TraceSolution:
    status: str
    basis: tuple[tuple[Fraction, ...], ...]
    vertices: tuple[str, ...]
    witness: GraphTrace | None
    obstructions: NecessaryConditions
    nonnegative: tuple[tuple[Fraction, ...], ...] = field(default=())

    @property
    def obstruction(self) -> str | None:
        tags = self.obstructions.tags
        return tags[0] if tags else None

    def to_json(self) -> dict:
        fmt = alg.format_rational
        return {
            "status": self.status,
            "dimension": len(self.basis),
            "vertices": list(self.vertices),
            "basis": [[fmt(x) for x in b] for b in self.basis],
            "witness": self.witness.to_json() if self.witness else None,
            "extreme_rays": [[fmt(x) for x in r] for r in self.nonnegative],
            "obstruction": self.obstruction,
            "obstructions": self.obstructions.to_json(),
        }


def trace_equations(graph: Graph) -> list[list[Fraction]]:
    rows = []
    for v in graph.vertices:
        if graph.is_sink(v):
            continue
        row = [Fraction(0)] * len(graph.vertices)
        row[graph.index[v]] += 1
        for e in graph.out_edges[v]:
            row[graph.index[e.range]] -= 1
        rows.append(row)
    return rows


def _normalise_ray(r):
    lead = next(x for x in r if x)
    scale = abs(lead)
    return tuple(x / scale for x in r)


MAX_RAY_SUBSETS = 2_000_000


def extreme_rays(basis) -> list[tuple[Fraction, ...]]:
    """Extreme rays of the cone of nonnegative vectors in ``span(basis)``.

    With ``B`` the vertex-by-coordinate matrix of the basis, the cone is
    ``{B l : B l >= 0}``; it is pointed because ``B`` has full column rank.
    Each extreme ray has ``d - 1`` independent active rows, so all subsets of
    that size are tried.
    """
    d = len(basis)
    if d == 0:
        return []
    n = len(basis[0])
    B = [[basis[j][i] for j in range(d)] for i in range(n)]
    # rows that are positive multiples of each other give the same constraint
    rows: list[tuple[Fraction, ...]] = []
    seen = set()
    for row in B:
        if any(row):
            key = _normalise_ray(row)
            if key not in seen:
                seen.add(key)
                rows.append(tuple(row))
    if math.comb(len(rows), d - 1) > MAX_RAY_SUBSETS:
        raise TraceError("solution cone too large for exact ray enumeration")
    found = set()
    for subset in itertools.combinations(rows, d - 1):
        ns = linalg.nullspace([list(r) for r in subset], ncols=d)
        if len(ns) != 1:
            continue
        lam = ns[0]
        x = linalg.matvec(B, lam)
        if all(v >= 0 for v in x):
            pass
        elif all(v <= 0 for v in x):
            x = [-v for v in x]
        else:
            continue
        if any(x):
            found.add(_normalise_ray(x))
    return sorted(found, reverse=True)


def solve_graph_traces(graph: Graph) -> TraceSolution:
    """Solve the trace equations exactly and look for a strictly positive solution.

    The status is ``faithful-witness`` when one exists (scaled so its
    smallest value is 1) and ``none`` when the obstruction report explains why
    not.  ``only-degenerate`` would mean no faithful trace *and* no flagged
    obstruction, which the theory rules out for finite graphs; it is kept as
    a loud consistency alarm rather than silently folded into ``none``.
    """
    rows = trace_equations(graph)
    n = len(graph.vertices)
    basis = linalg.nullspace(rows, ncols=n) if rows else linalg.identity(n)
    basis = [tuple(b) for b in basis]
    rays = extreme_rays(basis)
    obstructions = necessary_conditions(graph)
    witness = None
    if rays:
        total = [sum(col, Fraction(0)) for col in zip(*rays)]
        if all(x > 0 for x in total):
            low = min(total)
            witness = GraphTrace(tuple((v, x / low) for v, x in zip(graph.vertices, total)))
    if witness is not None:
        status = FAITHFUL
    elif obstructions.obstructed:
        status = NONE
    else:
        status = ONLY_DEGENERATE
    return TraceSolution(status, tuple(basis), graph.vertices, witness, obstructions, tuple(rays))


def in_solution_space(solution: TraceSolution, tr: GraphTrace) -> bool:
    vec = [tr.values[v] for v in solution.vertices]
    if not solution.basis:
        return not any(vec)
    mat = [list(b) for b in solution.basis]
    return linalg.rank(mat + [vec]) == linalg.rank(mat)


def construct_from_ends(graph: Graph, end_weights: Mapping | None = None) -> GraphTrace:
    """Extend weights on the ends backwards along first-arrival paths.

    ``end_weights`` maps :class:`End` objects or vertices on an end to
    positive rationals (missing ends default to 1).  Off the ends,
    ``g(v) = sum over ends of (#first-arrival paths v -> rep) * weight``,
    where ``rep`` is the vertex used as key (else the end's canonical
    representative).  Any vertex of a loop end gives the same counts.
    """
    cond = necessary_conditions(graph)
    if cond.obstructed:
        raise TraceError(f"graph has no faithful trace ({'; '.join(cond.tags)})")
    end_weights = dict(end_weights or {})
    weights: list[tuple[End, str, Fraction]] = []
    for end in ends(graph):
        rep, w = end.representative, 1
        if end in end_weights:
            w = end_weights.pop(end)
        else:
            keyed = [v for v in end.vertices if v in end_weights]
            if len(keyed) > 1:
                raise TraceError(f"several weights given for the end at {end.representative}")
            if keyed:
                rep = keyed[0]
                w = end_weights.pop(rep)
        w = Fraction(w)
        if w <= 0:
            raise TraceError(f"end weight at {rep} must be positive")
        weights.append((end, rep, w))
    if end_weights:
        raise TraceError(f"weights given for non-ends: {sorted(map(str, end_weights))}")
    on_end = {v: w for end, _, w in weights for v in end.vertices}
    values = {}
    for v in graph.vertices:
        if v in on_end:
            values[v] = on_end[v]
            continue
        total = Fraction(0)
        for end, rep, w in weights:
            total += count_paths_to_set(graph, v, [rep]) * w
        values[v] = total
    return GraphTrace.from_mapping(graph, values)


# the induced trace -------------------------------------------------------------

def term_trace(key: alg.Key, tr_values: Mapping[str, Fraction]) -> Fraction:
    mu, nu = key
    return tr_values[mu.range] if mu == nu else Fraction(0)


def tau(a: alg.Element, tr: GraphTrace):
    if a.unit:
        raise TraceError("tau is defined on the algebra without the adjoined unit")
    vals = tr.values
    total = Fraction(0)
    for (mu, nu), c in a.terms.items():
        if mu == nu:
            total += c * vals[mu.range]
    return alg.coeff(total)


def inner_product(x: alg.Element, y: alg.Element, tr: GraphTrace):
    """``<x, y> = tau(x^* y)``, conjugate-linear in ``x``."""
    return tau(alg.multiply(alg.adjoint(x), y), tr)


def term_inner(a: alg.Key, b: alg.Key, tr_values: Mapping[str, Fraction]) -> Fraction:
    """``<S_mu S_nu^*, S_alpha S_beta^*>`` for unit coefficients.

    ``(S_mu S_nu^*)^* S_alpha S_beta^* = S_nu S_mu^* S_alpha S_beta^*``; the
    trace keeps only diagonal terms, which gives the two prefix cases.
    """
    mu, nu = a
    alpha, beta = b
    if mu.is_prefix_of(alpha):
        sigma = mu.remainder(alpha)
        if nu.then(sigma) == beta:
            return tr_values[beta.range]
        return Fraction(0)
    if alpha.is_prefix_of(mu):
        sigma = alpha.remainder(mu)
        if beta.then(sigma) == nu:
            return tr_values[nu.range]
    return Fraction(0)
