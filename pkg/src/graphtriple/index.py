"""Semifinite trace, Dixmier values, zeta residues and the index pairing.

The pairing of a loop unitary with the gauge spectral triple is computed
three ways, which must agree exactly:

``residue``
    fold ``u [D, u^*]`` back to a combination of vertex projections and sum
    their zeta residues;
``closed``
    the formula ``-sum_i g(p_i)`` over the loop vertices;
``toeplitz``
    ``tilde_tau(ker PuP) - tilde_tau(coker PuP)`` from exact kernel and
    cokernel computations on a truncated module.

Negative degrees follow the no-source convention: ``p_v Phi_{-k}`` is given
the value ``g(v)`` whenever it is needed for a sum over all degrees, as it
is for every vertex of a graph without sources.  Finite generators only
have sources where an infinite tail was cut off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import algebra as alg
from . import kernels, linalg
from .graph import Graph, Loop, ends, paths_from, simple_loops
from .module import ModuleError, OperatorMatrix, TruncatedModule, path_vector
from .traces import GraphTrace, inner_product, tau


class PairingError(ValueError):
    """Domain error in the index layer (bad loop, sources, obstructed graph)."""


# semifinite trace --------------------------------------------------------------

def omega_mu(T: OperatorMatrix, mu, m: TruncatedModule):
    """``<S_mu, T S_mu> + <S_mu^*, T S_mu^*> / |r(mu)|_{|mu|}`` (first term only if ``|mu| = 0``)."""
    sv = path_vector(m, mu)
    img, bad = T.apply(sv)
    if bad:
        raise ModuleError(f"operator leaks past the truncation at S({mu})")
    value = m.inner(sv, img)
    if len(mu) == 0:
        return value
    sa = path_vector(m, mu, adjoint=True)
    img, bad = T.apply(sa)
    if bad:
        raise ModuleError(f"operator leaks past the truncation at S({mu})^*")
    count = m.graph.count_into(mu.range, len(mu))
    return alg.coeff(value + m.inner(sa, img) / count)


def all_paths(graph: Graph, max_len: int):
    for k in range(max_len + 1):
        for v in graph.vertices:
            yield from paths_from(graph, v, k)


def omega_sum(T: OperatorMatrix, m: TruncatedModule, max_len: int):
    """Definitional ``tilde_tau(T)``: ``sum of omega_mu`` over ``|mu| <= max_len``."""
    total = Fraction(0)
    for mu in all_paths(m.graph, max_len):
        total += omega_mu(T, mu, m)
    return alg.coeff(total)


def tilde_tau_rank_one(x: alg.Element, y: alg.Element, tr: GraphTrace):
    """Closed form ``tilde_tau(Theta_{x,y}) = tau(y^* x)``."""
    return inner_product(y, x, tr)


def omega_sum_rank_one(x: alg.Element, y: alg.Element, tr: GraphTrace):
    """``tilde_tau(Theta_{x,y})`` as a sum of ``omega_mu``, computed symbolically.

    ``Phi(y^* S_mu)`` and ``Phi(y^* S_mu^*)`` vanish once ``|mu|`` exceeds the
    longest path in ``y``, so the sum is finite.
    """
    g = x.graph
    ya = alg.adjoint(y)
    bound = max(x.max_length(), y.max_length())
    total = Fraction(0)
    for mu in all_paths(g, bound):
        s = alg.S(g, mu)
        total += inner_product(s, alg.multiply(x, alg.expectation(alg.multiply(ya, s))), tr)
        if len(mu):
            sa = alg.adjoint(s)
            val = inner_product(sa, alg.multiply(x, alg.expectation(alg.multiply(ya, sa))), tr)
            total += val / g.count_into(mu.range, len(mu))
    return alg.coeff(total)


def forward_mass(graph: Graph, v: str, tr: GraphTrace, k: int) -> Fraction:
    """``sum_{|rho|=k, s(rho)=v} g(r(rho))``."""
    return forward_masses(graph, v, tr, k)[k]


def forward_masses(graph: Graph, v: str, tr: GraphTrace, kmax: int) -> list[Fraction]:
    graph.require_vertex(v)
    vals = tr.values
    counts = {v: 1}
    out = []
    for k in range(kmax + 1):
        out.append(sum((c * vals[w] for w, c in counts.items()), Fraction(0)))
        if k == kmax:
            break
        nxt: dict[str, int] = {}
        for w, c in counts.items():
            for e in graph.out_edges[w]:
                nxt[e.range] = nxt.get(e.range, 0) + c
        counts = nxt
    return out


def tilde_tau_pv_phik(graph: Graph, v: str, k: int, tr: GraphTrace) -> Fraction:
    """``tilde_tau(p_v Phi_k)``: ``g(v)`` for ``k <= 0``, forward mass for ``k > 0``."""
    graph.require_vertex(v)
    if k < 0 and graph.count_into(v, -k) == 0:
        raise PairingError(f"no paths of length {-k} end at {v}; p_v Phi_{k} needs a source-free region")
    if k <= 0:
        return tr.values[v]
    return forward_mass(graph, v, tr, k)


def first_sink_distance(graph: Graph, v: str) -> int | None:
    """Length of the shortest path from ``v`` to a sink, if any."""
    dist = {v: 0}
    frontier = [v]
    while frontier:
        nxt = []
        for w in frontier:
            if graph.is_sink(w):
                return dist[w]
            for e in graph.out_edges[w]:
                if e.range not in dist:
                    dist[e.range] = dist[w] + 1
                    nxt.append(e.range)
        frontier = nxt
    return None


@dataclass(frozen=True)
class SemifiniteTraceValue:
    exact: Fraction
    mode: str  # "exact", "series-stabilized" or "float-partial-sum"
    stabilization: int | None = None
    approx: float | None = None


@dataclass(frozen=True)
class MassSequence:
    """Forward masses ``t_0, t_1, ...`` of ``p_v`` with their eventual constant."""

    head: tuple[Fraction, ...]  # t_0 .. t_{s-1}
    limit: Fraction  # t_k for all k >= s
    stabilization: int  # s

    def value(self, k: int) -> Fraction:
        return self.head[k] if k < len(self.head) else self.limit


def mass_sequence(graph: Graph, v: str, tr: GraphTrace) -> MassSequence:
    """Per-degree values for ``k >= 0`` until they provably stop changing.

    With every loop exitless, a path with ``|V|`` edges repeats a vertex, so
    it has entered an exitless loop and stays on it; from ``k = |V|`` on the
    mass just circulates around loops and is constant.
    """
    if any(lp.has_exit for lp in simple_loops(graph)):
        raise PairingError("stabilisation of the degree sequence needs every loop to be exitless")
    n = len(graph.vertices)
    seq = forward_masses(graph, v, tr, n)
    s = n
    while s > 0 and seq[s - 1] == seq[n]:
        s -= 1
    return MassSequence(tuple(seq[:s]), seq[n], s)


@dataclass(frozen=True)
class DixmierResult:
    vertex: str
    partial: float | None
    N: int | None
    closed_form: Fraction
    positive_limit: Fraction
    negative_value: Fraction
    stabilization: int
    head: tuple[Fraction, ...]

    def to_json(self) -> dict:
        fmt = alg.format_rational
        return {
            "vertex": self.vertex,
            "closed_form": fmt(self.closed_form),
            "partial": self.partial,
            "N": self.N,
            "positive_limit": fmt(self.positive_limit),
            "negative_value": fmt(self.negative_value),
            "stabilization": self.stabilization,
            "head": [fmt(x) for x in self.head],
        }


def dixmier_partial_sum(seq: MassSequence, negative: Fraction, N: int) -> float:
    """``F(N) = (1/log(2N+1)) sum_{|k|<=N} t_k (1+k^2)^{-1/2}``."""
    total = kernels.resolvent_partial_sum([float(x) for x in seq.head], float(seq.limit), float(negative), N)
    return total / math.log(2 * N + 1)


def dixmier(graph: Graph, v: str, tr: GraphTrace, N: int | None = None) -> DixmierResult:
    """Dixmier trace of ``p_v (1 + D^2)^{-1/2}`` and, if ``N`` is given, ``F(N)``.

    Both tails of the degree sum are eventually constant (``g(v)`` below,
    the forward limit ``c+`` above), each contributing its constant times
    ``log N`` asymptotically; the logarithmic mean is therefore
    ``g(v) + c+``.
    """
    seq = mass_sequence(graph, v, tr)
    neg = tr.values[v]
    partial = dixmier_partial_sum(seq, neg, N) if N is not None else None
    return DixmierResult(v, partial, N, neg + seq.limit, seq.limit, neg, seq.stabilization, seq.head)


@dataclass(frozen=True)
class ZetaResidue:
    vertex: str
    value: Fraction
    derivation: tuple[str, ...]

    def to_json(self) -> dict:
        return {"vertex": self.vertex, "value": alg.format_rational(self.value),
                "derivation": list(self.derivation)}


def zeta_residue(graph: Graph, v: str, tr: GraphTrace) -> ZetaResidue:
    """``res_{s=0} tilde_tau(p_v (1+D^2)^{-1/2-s})``, exactly.

    Past the stabilisation index the series is a constant times
    ``sum_k (1+k^2)^{-1/2-s}``, whose residue at ``s = 0`` is that constant per
    side; finitely many earlier terms are entire in ``s``.
    """
    seq = mass_sequence(graph, v, tr)
    neg = tr.values[v]
    value = (neg + seq.limit) / 2
    fmt = alg.format_rational
    first = f"k<0: tilde_tau(p_{v} Phi_k) = g({v}) = {fmt(neg)} for all k"
    if graph.is_source(v):
        first += f" (nothing enters {v}; the value used is the one for a graph without sources)"
    steps = (
        first,
        f"k>=0: forward masses {[fmt(x) for x in seq.head]} then constant {fmt(seq.limit)} from k={seq.stabilization}",
        "each constant tail c gives residue c/2 per side of sum (1+k^2)^(-1/2-s); finite heads are entire",
        f"residue = ({fmt(neg)} + {fmt(seq.limit)})/2 = {fmt(value)}",
    )
    return ZetaResidue(v, value, steps)


# loop unitaries --------------------------------------------------------------------

@dataclass(frozen=True)
class LoopUnitary:
    loop: Loop
    element: alg.Element
    projections: tuple[str, ...]  # v_1 .. v_n
    isometries: tuple[str, ...]  # e_1 .. e_n with s(e_i) = v_i, r(e_i) = v_{i+1}

    @property
    def n(self) -> int:
        return len(self.isometries)


def find_loop(graph: Graph, loop=None) -> Loop:
    loops = simple_loops(graph)
    if loop is None:
        if not loops:
            raise PairingError("graph has no loop")
        exitless = [lp for lp in loops if not lp.has_exit]
        return exitless[0] if exitless else loops[0]
    if isinstance(loop, Loop):
        return loop
    if isinstance(loop, int):
        return loops[loop]
    edges = tuple(loop.split()) if isinstance(loop, str) else tuple(loop)
    for lp in loops:
        if set(lp.edges) == set(edges) and len(lp.edges) == len(edges):
            return lp
    raise PairingError(f"no simple loop with edges {' '.join(edges)}")


def loop_unitary(graph: Graph, loop=None) -> LoopUnitary:
    """``u = 1 + S_1 + ... + S_n - (p_1 + ... + p_n)`` along an exitless loop."""
    lp = find_loop(graph, loop)
    if lp.has_exit:
        raise PairingError(f"loop {' '.join(lp.edges)} has an exit")
    u = alg.one(graph)
    for e in lp.edges:
        u = u + alg.S(graph, [e])
    for v in lp.vertices:
        u = u - alg.p(graph, v)
    return LoopUnitary(lp, u, lp.vertices, lp.edges)


def _require_faithful_on(tr: GraphTrace, verts):
    vals = tr.values
    bad = [v for v in verts if vals[v] <= 0]
    if bad:
        raise PairingError(f"trace vanishes on loop vertices {', '.join(bad)}")


@dataclass(frozen=True)
class ResidueRoute:
    commutator: alg.Element  # [D, u^*]
    folded: alg.Element  # u [D, u^*] after folding CK families
    residues: tuple[ZetaResidue, ...]
    residue_value: Fraction  # sum of zeta residues of the p_i
    spectral_flow: Fraction


def spectral_flow(lu: LoopUnitary, tr: GraphTrace) -> ResidueRoute:
    """Residue route: ``u [D, u^*]`` folds to ``-sum_i p_i``; sum zeta residues."""
    g = lu.element.graph
    _require_faithful_on(tr, lu.projections)
    comm = alg.gauge_derivative(alg.adjoint(lu.element))
    folded = alg.collapse(alg.multiply(lu.element, comm))
    if folded.unit:
        raise PairingError("u[D,u*] has a unit component")
    sf = Fraction(0)
    residues = []
    weight = {}
    for (mu, nu), c in folded.items():
        if not (mu.is_vertex and nu.is_vertex):
            raise PairingError(f"u[D,u*] does not fold to vertex projections: {folded}")
        if isinstance(c, alg.GaussianRational):
            raise PairingError("u[D,u*] has non-real coefficients")
        weight[mu.source] = c
    for v in g.vertices:
        if v in weight:
            r = zeta_residue(g, v, tr)
            residues.append(r)
            sf += weight[v] * r.value
    return ResidueRoute(comm, folded, tuple(residues), -sf, sf)


def spectral_flow_closed_form(lu: LoopUnitary, tr: GraphTrace) -> Fraction:
    _require_faithful_on(tr, lu.projections)
    vals = tr.values
    return -sum((vals[v] for v in lu.projections), Fraction(0))


# Toeplitz route ------------------------------------------------------------------

@dataclass
class ToeplitzResult:
    depth: int
    size: int  # matrix size m of u acting on H^m
    kernel_dim: int
    kernel_tau: Fraction
    coker_hilbert_dim: int
    coker_tau: Fraction
    coker_in_degree_one: bool
    coker_expected: bool | None  # coker == sum_i p_i Phi_1 (loop unitaries only)
    coker_rank_one_terms: tuple[str, ...] | None
    experimental: bool
    domain_dim: int
    target_dim: int
    notes: list[str] = field(default_factory=list)

    @property
    def index(self) -> Fraction:
        return self.kernel_tau - self.coker_tau

    @property
    def coker_rank(self) -> int | None:
        """Number of rank-one ``Theta_{S_rho,S_rho}`` summands of the cokernel projection."""
        return None if self.coker_rank_one_terms is None else len(self.coker_rank_one_terms)

    def to_json(self) -> dict:
        fmt = alg.format_rational
        return {
            "depth": self.depth,
            "size": self.size,
            "kernel_dim": self.kernel_dim,
            "kernel_tau": fmt(self.kernel_tau),
            "coker_dim": self.coker_rank if self.coker_rank is not None else self.coker_hilbert_dim,
            "coker_hilbert_dim": self.coker_hilbert_dim,
            "coker_tau": fmt(self.coker_tau),
            "coker_in_degree_one": self.coker_in_degree_one,
            "coker_matches_loop_projection": self.coker_expected,
            "coker_rank_one_terms": list(self.coker_rank_one_terms) if self.coker_rank_one_terms is not None else None,
            "index": fmt(self.index),
            "experimental": self.experimental,
            "domain_dim": self.domain_dim,
            "target_dim": self.target_dim,
            "notes": self.notes,
        }


def _positive_part(x: alg.Element) -> alg.Element:
    return alg.Element._raw(x.graph, {k: c for k, c in x.terms.items() if alg.degree(k) >= 1}, Fraction(0))


def _subspace_tau(vectors: list[dict], m: TruncatedModule, size: int, max_deg: int) -> Fraction:
    """``tilde_tau`` of the projection onto ``span(vectors)`` in ``H^size``.

    Each vector is a dict ``(component, basis index) -> coefficient`` living
    in positive degrees, so only the ``<S_mu, Q S_mu>`` half of ``omega_mu``
    contributes and only for ``1 <= |mu| <= max_deg``.
    """
    if not vectors:
        return Fraction(0)

    def ip(x, y):
        total = Fraction(0)
        for a in range(size):
            xa = {i: c for (b, i), c in x.items() if b == a}
            ya = {i: c for (b, i), c in y.items() if b == a}
            if xa and ya:
                total += m.inner(xa, ya)
        return alg.coeff(total)

    G = [[ip(x, y) for y in vectors] for x in vectors]
    Ginv = linalg.inverse(G)
    total = Fraction(0)
    for mu in all_paths(m.graph, max_deg):
        if len(mu) == 0:
            continue
        sv = path_vector(m, mu)
        for a in range(size):
            probe = {(a, i): c for i, c in sv.items()}
            b = [ip(x, probe) for x in vectors]
            if not any(b):
                continue
            w = linalg.matvec(Ginv, b)
            total += sum((alg.conj(bi) * wi for bi, wi in zip(b, w)), Fraction(0))
    return alg.coeff(total)


_BIG_CACHE: dict = {}


def _module_at(graph: Graph, tr: GraphTrace, depth: int) -> TruncatedModule:
    key = (graph, tr, depth)
    mod = _BIG_CACHE.get(key)
    if mod is None:
        if len(_BIG_CACHE) > 32:
            _BIG_CACHE.clear()
        mod = TruncatedModule(graph, tr, depth)
        _BIG_CACHE[key] = mod
    return mod


def toeplitz_index(u, m: TruncatedModule, loop_unitary_: LoopUnitary | None = None) -> ToeplitzResult:
    """Kernel and cokernel of ``P u P`` on the truncated positive part.

    ``u`` is an element of the unitisation or a square matrix of them acting
    on ``H^size``.  The domain is every basis vector of degree ``1..L-1``; the
    images are expressed exactly in a module of depth ``L+1`` (``u`` adds at
    most one edge).  The cokernel is computed inside degrees ``1..L-2``;
    degree ``L-1`` is left out because its preimages would sit in degree
    ``L``, outside the domain.
    """
    if isinstance(u, LoopUnitary):
        loop_unitary_ = u
        u = u.element
    U = [[u]] if isinstance(u, alg.Element) else [list(row) for row in u]
    size = len(U)
    if any(len(row) != size for row in U):
        raise PairingError("operator matrix must be square")
    L = m.depth
    if L < 3:
        raise PairingError("the Toeplitz route needs module depth at least 3")
    growth = max((x.max_length() for row in U for x in row), default=0)
    if growth > 1:
        raise PairingError("the Toeplitz route handles entries with paths of length at most 1")
    experimental = any(d < 0 for row in U for x in row for d in x.degrees())
    big = _module_at(m.graph, m.trace, L + 1)
    dom = m.indices(degrees=range(1, L))
    tgt = m.indices(degrees=range(1, L - 1))

    # images of the domain, in big-module coordinates, one dict per column
    images = []
    for a in range(size):
        for j in dom:
            z = m.element(j)
            col = {}
            for b in range(size):
                if U[b][a].is_zero():
                    continue
                y = _positive_part(alg.multiply(U[b][a], z))
                vec, bad = big.express(y)
                if bad:
                    raise ModuleError("image of P u P escaped the enlarged truncation")
                for i, c in vec.items():
                    col[(b, i)] = c
            images.append(col)
    flat = {}
    stacked = []
    for col in images:
        stacked.append({flat.setdefault(k, len(flat)): v for k, v in col.items()})
    _, null = linalg.sparse_nullspace(stacked)
    dom_pairs = [(a, j) for a in range(size) for j in dom]
    kernel = []
    for combo in null:
        vec = {}
        for idx, c in combo.items():
            vec[dom_pairs[idx]] = c
        kernel.append(vec)

    # cokernel: target vectors orthogonal to every image
    def big_inner(b, i, col):
        vi = big.coords[m.basis[i]]
        part = {k: c for (bb, k), c in col.items() if bb == b}
        return big.inner(vi, part) if part else Fraction(0)

    tgt_pairs = [(b, i) for b in range(size) for i in tgt]
    rows = []
    for b, i in tgt_pairs:
        row = {}
        for jdx, col in enumerate(images):
            val = big_inner(b, i, col)
            if val:
                row[jdx] = val
        rows.append(row)
    _, left_null = linalg.sparse_nullspace(rows)
    coker = []
    for combo in left_null:
        coker.append({tgt_pairs[idx]: alg.conj(c) for idx, c in combo.items()})

    in_deg_one = all(m.degree_of[i] == 1 for vec in coker for (_, i) in vec)
    ker_tau = _subspace_tau(kernel, m, size, L - 1)
    cok_tau = _subspace_tau(coker, m, size, L - 2)
    expected = None
    rank_one_terms = None
    notes = [f"degree {L - 1} of the target is boundary padding and is not checked"]
    if loop_unitary_ is not None and size == 1:
        loop_vs = set(loop_unitary_.projections)
        allowed = {(0, i) for i in tgt if m.degree_of[i] == 1 and m.basis[i][0].source in loop_vs}
        inside = all(set(vec) <= allowed for vec in coker)
        expected = inside and len(coker) == len(allowed)
        g = m.graph
        rank_one_terms = tuple(e.id for v in loop_unitary_.projections for e in g.out_edges[v])
    if experimental:
        notes.append("u has negative-degree terms; Toeplitz index is experimental")
    return ToeplitzResult(L, size, len(kernel), ker_tau, len(coker), cok_tau, in_deg_one,
                          expected, rank_one_terms, experimental, len(dom_pairs), len(tgt_pairs), notes)


# K-theory and reports --------------------------------------------------------------

@dataclass(frozen=True)
class KTheoryRanks:
    k0_rank: int
    k1_rank: int

    def to_json(self) -> dict:
        return {"k0_rank": self.k0_rank, "k1_rank": self.k1_rank}


def k_theory_ranks(graph: Graph) -> KTheoryRanks:
    loops = simple_loops(graph)
    if any(lp.has_exit for lp in loops):
        raise PairingError("rank formula needs every loop to be exitless")
    return KTheoryRanks(len(ends(graph)), len(loops))


@dataclass
class IndexReport:
    loop: Loop
    spectral_flow_closed_form: Fraction
    residue: ResidueRoute | None
    toeplitz: ToeplitzResult | None

    @property
    def residue_value(self) -> Fraction | None:
        return None if self.residue is None else self.residue.residue_value

    @property
    def agreement(self) -> bool:
        vals = [self.spectral_flow_closed_form]
        if self.residue is not None:
            vals.append(-self.residue.residue_value)
        if self.toeplitz is not None:
            vals.append(self.toeplitz.index)
        return len(set(vals)) == 1

    def to_json(self) -> dict:
        fmt = alg.format_rational
        out = {
            "loop": list(self.loop.edges),
            "n": len(self.loop.edges),
            "spectral_flow": fmt(self.spectral_flow_closed_form),
            "routes": {"closed": fmt(self.spectral_flow_closed_form)},
            "agreement": self.agreement,
        }
        if self.residue is not None:
            r = self.residue
            out["routes"]["residue"] = fmt(r.spectral_flow)
            out["residue"] = {
                "residue_value": fmt(r.residue_value),
                "commutator": str(r.commutator),
                "u_commutator_folded": str(r.folded),
                "vertex_residues": [z.to_json() for z in r.residues],
            }
        if self.toeplitz is not None:
            out["routes"]["toeplitz"] = fmt(self.toeplitz.index)
            out["toeplitz"] = self.toeplitz.to_json()
        return out


ROUTES = ("residue", "closed", "toeplitz")


def index_report(lu: LoopUnitary, tr: GraphTrace, m: TruncatedModule | None = None,
                 routes=ROUTES) -> IndexReport:
    closed = spectral_flow_closed_form(lu, tr)
    residue = spectral_flow(lu, tr) if "residue" in routes else None
    toe = None
    if "toeplitz" in routes:
        if m is None:
            raise PairingError("the Toeplitz route needs a truncated module")
        toe = toeplitz_index(lu, m)
    return IndexReport(lu.loop, closed, residue, toe)


@dataclass(frozen=True)
class DirectSumCheck:
    index_u: Fraction
    index_v: Fraction
    index_sum: Fraction

    @property
    def ok(self) -> bool:
        return self.index_sum == self.index_u + self.index_v


def _as_matrix(x):
    if isinstance(x, LoopUnitary):
        x = x.element
    return [[x]] if isinstance(x, alg.Element) else [list(r) for r in x]


def direct_sum(a, b):
    A, B = _as_matrix(a), _as_matrix(b)
    g = (A[0][0]).graph
    n, k = len(A), len(B)
    z = alg.zero(g)
    return [A[i] + [z] * k for i in range(n)] + [[z] * n + B[i] for i in range(k)]


def direct_sum_additivity(u, v, m: TruncatedModule) -> DirectSumCheck:
    """Index of ``u (+) v`` on ``H^2`` against the sum of the separate indices."""
    iu = toeplitz_index(_as_matrix(u), m).index
    iv = toeplitz_index(_as_matrix(v), m).index
    isum = toeplitz_index(direct_sum(u, v), m).index
    return DirectSumCheck(iu, iv, isum)
