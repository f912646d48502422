"""Independent reference computations used by the tests.

None of these call into the code under test beyond the plain data types
(Graph, Path, Element): they work from the definitions directly.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from graphtriple.graph import Path, paths_from


def _apply_term(mu: Path, nu: Path, x: Path):
    """S_mu S_nu^* on the basis vector of the path x, or None."""
    if len(nu) > len(x) or x.source != nu.source or x.edges[:len(nu)] != nu.edges:
        return None
    rest = x.edges[len(nu):]
    return Path(mu.source, mu.edges + rest, x.range)


def fock_apply(a, x: Path) -> dict:
    """Action on the path space l^2(E*), where only S_e^* S_f = delta p_r(e) holds.

    Distinct terms S_mu S_nu^* stay independent here, so this checks raw
    products exactly.
    """
    out: dict = defaultdict(Fraction)
    if a.unit:
        out[x] += a.unit
    for (mu, nu), c in a.terms.items():
        y = _apply_term(mu, nu, x)
        if y is not None:
            out[y] += c
    return {k: v for k, v in out.items() if v}


def fock_apply_vec(a, vec: dict) -> dict:
    out: dict = defaultdict(Fraction)
    for x, c in vec.items():
        for y, d in fock_apply(a, x).items():
            out[y] += c * d
    return {k: v for k, v in out.items() if v}


def boundary_prefixes(graph, n: int) -> list[Path]:
    """Prefixes of length n of boundary paths, plus shorter paths ending at sinks."""
    out = list()
    for v in graph.vertices:
        for k in range(n + 1):
            for p in paths_from(graph, v, k):
                if k == n or graph.is_sink(p.range):
                    out.append(p)
    return out


def boundary_signature(a, n: int) -> dict:
    """The action of ``a`` on the boundary-path representation, cut to prefixes.

    With n at least the longest nu in a, the image of a cylinder x.y is
    (sum c mu (x minus nu)).y, so this table determines a in the graph algebra.
    """
    sig = {}
    for x in boundary_prefixes(a.graph, n):
        img = fock_apply(a, x)
        if img:
            sig[x] = img
    return sig


def relation_zero(a) -> bool:
    n = max((len(nu) for _, nu in a.terms), default=0)
    return not boundary_signature(a, n)


def tau_definition(a, values) -> Fraction:
    """tau(S_mu S_nu^*) = delta_{mu,nu} g(r(mu)), extended linearly (unit excluded)."""
    return sum((c * values[mu.range] for (mu, nu), c in a.terms.items() if mu == nu), Fraction(0))
