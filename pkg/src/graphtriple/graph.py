"""Finite directed graphs, paths, loops and ends.

Graphs are immutable once built.  Vertices and edges keep their declaration
order, which is what every deterministic ordering downstream is based on.

Path counts between vertices use *first-arrival* semantics: a path from
``v`` to ``w`` stops the first time it reaches ``w``.  Without that
convention a vertex on an exitless loop would have infinitely many paths to
itself, and the circle graph (which plainly carries a faithful trace) would
be flagged as obstructed.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable

import networkx as nx

from . import kernels

INFINITE = math.inf


class GraphError(ValueError):
    """Bad graph input: parse errors, unknown ids, malformed paths."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    range: str


@dataclass(frozen=True)
class Path:
    """A finite path; the empty path at ``v`` has ``edges == ()``."""

    source: str
    edges: tuple[str, ...]
    range: str

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def is_vertex(self) -> bool:
        return not self.edges

    def then(self, other: "Path") -> "Path":
        if self.range != other.source:
            raise GraphError(f"cannot compose {self} with {other}")
        return Path(self.source, self.edges + other.edges, other.range)

    def is_prefix_of(self, other: "Path") -> bool:
        return self.source == other.source and other.edges[: len(self.edges)] == self.edges

    def remainder(self, other: "Path") -> "Path":
        """``sigma`` with ``self.then(sigma) == other``; requires a prefix."""
        if not self.is_prefix_of(other):
            raise GraphError(f"{self} is not a prefix of {other}")
        return Path(self.range, other.edges[len(self.edges):], other.range)

    def sort_key(self):
        return (len(self.edges), self.edges, self.source)

    def __str__(self) -> str:
        return " ".join(self.edges) if self.edges else f"<{self.source}>"


class Graph:
    """Finite directed graph with string vertex and edge ids."""

    def __init__(self, vertices: Iterable[str], edges: Iterable[Edge],
                 truncation_heads: Iterable[str] = ()):
        self.vertices: tuple[str, ...] = tuple(vertices)
        self.edges: tuple[Edge, ...] = tuple(edges)
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex id")
        vset = set(self.vertices)
        self.edge: dict[str, Edge] = {}
        for e in self.edges:
            if e.id in self.edge:
                raise GraphError(f"duplicate edge id {e.id!r}")
            if e.source not in vset or e.range not in vset:
                raise GraphError(f"edge {e.id!r} references an undeclared vertex")
            self.edge[e.id] = e
        self.truncation_heads = frozenset(truncation_heads)
        if not self.truncation_heads <= vset:
            raise GraphError("truncation head is not a vertex")
        out: dict[str, list[Edge]] = {v: [] for v in self.vertices}
        inc: dict[str, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            out[e.source].append(e)
            inc[e.range].append(e)
        self.out_edges = {v: tuple(es) for v, es in out.items()}
        self.in_edges = {v: tuple(es) for v, es in inc.items()}
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self._cache: dict = {}

    # identity ------------------------------------------------------------
    def _key(self):
        return (self.vertices, self.edges, tuple(sorted(self.truncation_heads)))

    def __eq__(self, other):
        return isinstance(other, Graph) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"Graph({len(self.vertices)} vertices, {len(self.edges)} edges)"

    def to_text(self) -> str:
        lines = ["v " + " ".join(self.vertices)] if self.vertices else []
        lines += [f"e {e.id}: {e.source} -> {e.range}" for e in self.edges]
        return "\n".join(lines) + "\n"

    # basic predicates ----------------------------------------------------
    def require_vertex(self, v: str) -> None:
        if v not in self.index:
            raise GraphError(f"unknown vertex {v!r}")

    def is_sink(self, v: str) -> bool:
        return not self.out_edges[v]

    def is_source(self, v: str) -> bool:
        return not self.in_edges[v]

    def sinks(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if self.is_sink(v))

    def sources(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if self.is_source(v))

    # paths ---------------------------------------------------------------
    def vertex_path(self, v: str) -> Path:
        self.require_vertex(v)
        return Path(v, (), v)

    def path(self, edge_ids: Iterable[str], base: str | None = None) -> Path:
        ids = tuple(edge_ids)
        if not ids:
            if base is None:
                raise GraphError("empty path needs a base vertex")
            return self.vertex_path(base)
        for x in ids:
            if x not in self.edge:
                raise GraphError(f"unknown edge {x!r}")
        for a, b in zip(ids, ids[1:]):
            if self.edge[a].range != self.edge[b].source:
                raise GraphError(f"edges {a!r} and {b!r} do not compose")
        first = self.edge[ids[0]].source
        if base is not None and base != first:
            raise GraphError(f"path {' '.join(ids)} does not start at {base!r}")
        return Path(first, ids, self.edge[ids[-1]].range)

    def adjacency(self) -> list[list[int]]:
        n = len(self.vertices)
        adj = [[0] * n for _ in range(n)]
        for e in self.edges:
            adj[self.index[e.source]][self.index[e.range]] += 1
        return adj

    def _walks(self, steps: int, incoming: bool) -> list[list[int]]:
        key = ("walks", incoming)
        have = self._cache.get(key)
        if have is None or len(have) <= steps:
            depth = max(steps, 2 * (len(have) - 1) if have else 8)
            have = kernels.walk_counts(self.adjacency(), depth, incoming=incoming)
            self._cache[key] = have
        return have

    def count_into(self, v: str, k: int) -> int:
        """``|v|_k``: the number of paths of length ``k`` with range ``v``."""
        self.require_vertex(v)
        return self._walks(k, True)[k][self.index[v]]

    def count_from(self, v: str, k: int) -> int:
        self.require_vertex(v)
        return self._walks(k, False)[k][self.index[v]]

    def networkx(self) -> nx.MultiDiGraph:
        gr = nx.MultiDiGraph()
        gr.add_nodes_from(self.vertices)
        for e in self.edges:
            gr.add_edge(e.source, e.range, key=e.id)
        return gr


# parsing -----------------------------------------------------------------

_ID = r"[^\s:;#]+"
_EDGE_RE = re.compile(rf"^e(?:\s+({_ID}))?\s*:\s*({_ID})\s*->\s*({_ID})$")


def parse_graph(text: str) -> Graph:
    """Parse the line format ``v a b c`` / ``e id: a -> b``.

    ``#`` starts a comment; ``;`` separates statements on one line.  The edge
    id may be omitted (``e: a -> b``), in which case ``e1``, ``e2``, ... are
    assigned in order, skipping ids already taken.
    """
    vertices: list[str] = []
    seen_v: set[str] = set()
    raw_edges: list[tuple[str | None, str, str, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for stmt in line.split(";"):
            stmt = stmt.strip()
            if not stmt:
                continue
            head = stmt.split(None, 1)[0]
            if head == "v":
                ids = stmt.split()[1:]
                if not ids:
                    raise GraphError("vertex line declares nothing", lineno)
                for v in ids:
                    if v in seen_v:
                        raise GraphError(f"duplicate vertex {v!r}", lineno)
                    seen_v.add(v)
                    vertices.append(v)
            elif head.startswith("e"):
                m = _EDGE_RE.match(stmt)
                if not m:
                    raise GraphError(f"malformed edge statement {stmt!r}", lineno)
                raw_edges.append((m.group(1), m.group(2), m.group(3), lineno))
            else:
                raise GraphError(f"unrecognised statement {stmt!r}", lineno)
    taken = {eid for eid, *_ in raw_edges if eid is not None}
    edges: list[Edge] = []
    seen_e: set[str] = set()
    counter = itertools.count(1)
    for eid, src, dst, lineno in raw_edges:
        if eid is None:
            eid = next(f"e{i}" for i in counter if f"e{i}" not in taken)
            taken.add(eid)
        if eid in seen_e:
            raise GraphError(f"duplicate edge {eid!r}", lineno)
        for x in (src, dst):
            if x not in seen_v:
                raise GraphError(f"edge {eid!r} references undeclared vertex {x!r}", lineno)
        seen_e.add(eid)
        edges.append(Edge(eid, src, dst))
    return Graph(vertices, edges)


def loop_graph(n: int) -> Graph:
    """The ``n``-cycle ``v1 -> v2 -> ... -> vn -> v1`` with edges ``e1..en``."""
    if n < 1:
        raise GraphError("loop length must be at least 1")
    vs = [f"v{i}" for i in range(1, n + 1)]
    return Graph(vs, [Edge(f"e{i}", vs[i - 1], vs[i % n]) for i in range(1, n + 1)])


def fryingpan_graph(n: int, tail: int) -> Graph:
    """An ``n``-cycle fed by a tail ``t1 -> ... -> t<tail> -> v1``.

    The tail stands in for an infinite one, so ``t1`` is recorded as a
    truncation head: it is a source only because the tail was cut.
    """
    if n < 1 or tail < 0:
        raise GraphError("fryingpan needs n >= 1 and tail >= 0")
    base = loop_graph(n)
    ts = [f"t{j}" for j in range(1, tail + 1)]
    tail_edges = [Edge(f"f{j}", ts[j - 1], ts[j] if j < tail else "v1") for j in range(1, tail + 1)]
    return Graph(ts + list(base.vertices), tail_edges + list(base.edges),
                 truncation_heads=ts[:1])


_GEN_RE = re.compile(r"^@(loop|fryingpan):(\d+)(?:,(\d+))?$")


def load_graph(spec: str) -> Graph:
    """Load ``@loop:n``, ``@fryingpan:n,t`` or a graph file path."""
    if spec.startswith("@"):
        m = _GEN_RE.match(spec.strip())
        if not m:
            raise GraphError(f"unknown generator {spec!r}")
        kind, a, b = m.groups()
        if kind == "loop":
            if b is not None:
                raise GraphError("@loop takes one argument")
            return loop_graph(int(a))
        if b is None:
            raise GraphError("@fryingpan takes two arguments n,t")
        return fryingpan_graph(int(a), int(b))
    try:
        text = FsPath(spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphError(f"cannot read graph file {spec!r}: {exc.strerror}") from None
    return parse_graph(text)


# loops and ends ----------------------------------------------------------

@dataclass(frozen=True)
class Loop:
    edges: tuple[str, ...]
    vertices: tuple[str, ...]
    has_exit: bool

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class End:
    kind: str  # "sink" or "loop"
    vertices: tuple[str, ...]
    loop: Loop | None = None

    @property
    def representative(self) -> str:
        return self.vertices[0]


def _canonical_rotation(edges: tuple[str, ...]) -> tuple[str, ...]:
    return min(edges[i:] + edges[:i] for i in range(len(edges)))


def simple_loops(g: Graph) -> tuple[Loop, ...]:
    """All simple cycles, each in its lexicographically least rotation."""
    if "loops" in g._cache:
        return g._cache["loops"]
    simple = nx.DiGraph()
    simple.add_nodes_from(g.vertices)
    parallel: dict[tuple[str, str], list[str]] = {}
    for e in g.edges:
        simple.add_edge(e.source, e.range)
        parallel.setdefault((e.source, e.range), []).append(e.id)
    found: set[tuple[str, ...]] = set()
    for cyc in nx.simple_cycles(simple):
        hops = [(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]
        for choice in itertools.product(*(parallel[h] for h in hops)):
            found.add(_canonical_rotation(tuple(choice)))
    loops = []
    for edges in sorted(found):
        members = set(edges)
        verts = tuple(g.edge[x].source for x in edges)
        has_exit = any(e.id not in members for v in verts for e in g.out_edges[v])
        loops.append(Loop(edges, verts, has_exit))
    g._cache["loops"] = tuple(loops)
    return g._cache["loops"]


def ends(g: Graph) -> tuple[End, ...]:
    """Sinks (declaration order) followed by exitless loops.

    Exitless infinite paths, the third kind of end, cannot occur in a
    finite graph.
    """
    out = [End("sink", (v,)) for v in g.sinks()]
    out += [End("loop", lp.vertices, lp) for lp in simple_loops(g) if not lp.has_exit]
    return tuple(out)


@dataclass(frozen=True)
class GraphReport:
    sinks: tuple[str, ...]
    sources: tuple[str, ...]
    loops: tuple[Loop, ...]
    ends: tuple[End, ...]
    no_sources: bool
    truncation_heads: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "sinks": list(self.sinks),
            "sources": list(self.sources),
            "loops": [{"edges": list(lp.edges), "vertices": list(lp.vertices),
                       "has_exit": lp.has_exit} for lp in self.loops],
            "ends": [{"kind": e.kind, "vertices": list(e.vertices)} for e in self.ends],
            "no_sources": self.no_sources,
            "truncation_heads": list(self.truncation_heads),
        }


def graph_report(g: Graph) -> GraphReport:
    sources = g.sources()
    return GraphReport(
        sinks=g.sinks(),
        sources=sources,
        loops=simple_loops(g),
        ends=ends(g),
        no_sources=not sources,
        truncation_heads=tuple(v for v in g.vertices if v in g.truncation_heads),
    )


# path enumeration --------------------------------------------------------

def paths_from(g: Graph, v: str, n: int) -> list[Path]:
    """All paths of length exactly ``n`` starting at ``v``."""
    g.require_vertex(v)
    if n < 0:
        raise GraphError("path length must be nonnegative")
    frontier = [g.vertex_path(v)]
    for _ in range(n):
        frontier = [Path(p.source, p.edges + (e.id,), e.range)
                    for p in frontier for e in g.out_edges[p.range]]
    return sorted(frontier, key=Path.sort_key)


def paths_into(g: Graph, v: str, k: int) -> list[Path]:
    """All paths of length exactly ``k`` ending at ``v``; ``len`` is ``|v|_k``."""
    g.require_vertex(v)
    if k < 0:
        raise GraphError("path length must be nonnegative")
    frontier = [g.vertex_path(v)]
    for _ in range(k):
        frontier = [Path(e.source, (e.id,) + p.edges, p.range)
                    for p in frontier for e in g.in_edges[p.source]]
    return sorted(frontier, key=Path.sort_key)


def paths_at_most(g: Graph, v: str, n: int) -> list[Path]:
    """Paths from ``v`` of length ``n``, plus shorter ones ending on a sink."""
    g.require_vertex(v)
    if n < 0:
        raise GraphError("path length must be nonnegative")
    done: list[Path] = []
    frontier = [g.vertex_path(v)]
    for _ in range(n):
        nxt = []
        for p in frontier:
            if g.is_sink(p.range):
                done.append(p)
            else:
                nxt.extend(Path(p.source, p.edges + (e.id,), e.range) for e in g.out_edges[p.range])
        frontier = nxt
    return sorted(done + frontier, key=Path.sort_key)


def count_paths_to_set(g: Graph, v: str, targets: Iterable[str]) -> int | float:
    """Number of first-arrival paths from ``v`` into ``targets``.

    Returns ``INFINITE`` when a cycle avoiding ``targets`` can be entered
    from ``v`` and still leads into ``targets``.
    """
    g.require_vertex(v)
    tset = set(targets)
    for t in tset:
        g.require_vertex(t)
    if v in tset:
        return 1
    # paths stop on arrival, so targets have no usable out-edges
    succ = {u: [e.range for e in g.out_edges[u]] if u not in tset else [] for u in g.vertices}
    reach = {v}
    stack = [v]
    while stack:
        u = stack.pop()
        for w in succ[u]:
            if w not in reach:
                reach.add(w)
                stack.append(w)
    pred: dict[str, list[str]] = {u: [] for u in g.vertices}
    for u in g.vertices:
        for w in succ[u]:
            pred[w].append(u)
    coreach = set(tset)
    stack = list(tset)
    while stack:
        u = stack.pop()
        for w in pred[u]:
            if w not in coreach:
                coreach.add(w)
                stack.append(w)
    live = reach & coreach
    sub = nx.DiGraph()
    sub.add_nodes_from(live)
    sub.add_edges_from((u, w) for u in live for w in succ[u] if w in live)
    try:
        order = list(nx.topological_sort(sub))
    except nx.NetworkXUnfeasible:
        return INFINITE
    ways = {u: 0 for u in live}
    if v in live:
        ways[v] = 1
    total = 0
    for u in order:
        if u in tset:
            total += ways[u]
            continue
        for e in g.out_edges[u]:
            if e.range in live:
                ways[e.range] += ways[u]
    return total


def count_vw_paths(g: Graph, v: str, w: str) -> int | float:
    """First-arrival paths ``v -> w`` (``INFINITE`` if unbounded)."""
    return count_paths_to_set(g, v, [w])
