"""Exact arithmetic in the spanning algebra of ``S_mu S_nu^*`` terms.

Elements are finite linear combinations of terms ``S_mu S_nu^*`` with
``r(mu) == r(nu)``, plus an optional coefficient on a formally adjoined unit
``1+``.  The unit is kept separate from the vertex projections on purpose: in
``A+ = A (+) C`` the element ``1+ - sum_v p_v`` is nonzero, so ``S_e`` alone is
not unitary on the circle graph while the loop unitary ``1+ + S - p`` is.

Products only use the collapse rule ``S_nu^* S_alpha``.  The Cuntz-Krieger
relation ``p_v = sum_{s(e)=v} S_e S_e^*`` is *not* applied while multiplying;
elements stay in the raw spanning form.  Equality modulo that relation is
decided by :func:`normal_form`, see its docstring.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Union

from .graph import Graph, GraphError, Path

Rational = Fraction


class GaussianRational:
    """``real + imag*i`` with both parts exact fractions."""

    __slots__ = ("real", "imag")

    def __init__(self, real=0, imag=0):
        self.real = Fraction(real)
        self.imag = Fraction(imag)

    @staticmethod
    def _lift(x):
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)):
            return GaussianRational(x, 0)
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.real + o.real, self.imag + o.imag)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.real - o.real, self.imag - o.imag)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.real * o.real - self.imag * o.imag,
                                self.real * o.imag + self.imag * o.real)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        den = o.real * o.real + o.imag * o.imag
        if not den:
            raise ZeroDivisionError("division by zero")
        num = self * o.conjugate()
        return GaussianRational(num.real / den, num.imag / den)

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussianRational(-self.real, -self.imag)

    def __pos__(self):
        return self

    def conjugate(self):
        return GaussianRational(self.real, -self.imag)

    def __bool__(self):
        return bool(self.real) or bool(self.imag)

    def __eq__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.real == o.real and self.imag == o.imag

    def __hash__(self):
        if not self.imag:
            return hash(self.real)
        return hash((self.real, self.imag))

    def __repr__(self):
        return f"GaussianRational({self.real}, {self.imag})"

    def __str__(self):
        return format_coeff(self)


Coeff = Union[Fraction, GaussianRational]

I = GaussianRational(0, 1)


def coeff(x) -> Coeff:
    """Canonical coefficient: a ``Fraction`` unless the imaginary part is nonzero."""
    if isinstance(x, GaussianRational):
        return x if x.imag else x.real
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact coefficient: {x!r}")


def conj(x: Coeff) -> Coeff:
    return coeff(x.conjugate())


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_coeff(x) -> str:
    """``"p/q"`` for rationals, ``"a+bi"`` style for Gaussian rationals."""
    x = coeff(x)
    if isinstance(x, Fraction):
        return format_rational(x)
    im = x.imag
    im_txt = "" if abs(im) == 1 else format_rational(abs(im)) + "*"
    sign = "-" if im < 0 else "+"
    if not x.real:
        return f"{'-' if im < 0 else ''}{im_txt}i"
    return f"{format_rational(x.real)}{sign}{im_txt}i"


Key = tuple[Path, Path]


def term_sort_key(key: Key):
    mu, nu = key
    return (len(mu) - len(nu), len(mu), mu.edges, len(nu), nu.edges, mu.source, nu.source)


class AlgebraError(ValueError):
    pass


class Element:
    """A finite combination ``unit*1+ + sum c_{mu,nu} S_mu S_nu^*``.

    Treat instances as immutable.  ``==`` compares the raw spanning form; use
    :func:`relation_equal` for equality in the graph algebra.
    """

    __slots__ = ("graph", "terms", "unit")

    def __init__(self, graph: Graph, terms: dict | None = None, unit=0):
        self.graph = graph
        clean = {}
        for (mu, nu), c in (terms or {}).items():
            if mu.range != nu.range:
                raise AlgebraError(f"term S({mu}) S({nu})^* needs r(mu) == r(nu)")
            c = coeff(c)
            if c:
                clean[(mu, nu)] = c
        self.terms: dict[Key, Coeff] = clean
        self.unit: Coeff = coeff(unit)

    # construction helpers ------------------------------------------------
    @classmethod
    def _raw(cls, graph, terms, unit):
        obj = cls.__new__(cls)
        obj.graph = graph
        obj.terms = terms
        obj.unit = unit
        return obj

    def items(self):
        return sorted(self.terms.items(), key=lambda kv: term_sort_key(kv[0]))

    def is_zero(self) -> bool:
        """Syntactic zero (no terms, no unit)."""
        return not self.terms and not self.unit

    def max_length(self) -> int:
        return max((max(len(mu), len(nu)) for mu, nu in self.terms), default=0)

    def degrees(self) -> set[int]:
        out = {len(mu) - len(nu) for mu, nu in self.terms}
        if self.unit:
            out.add(0)
        return out

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.graph == other.graph and self.unit == other.unit and self.terms == other.terms

    def __hash__(self):
        return hash((self.unit, frozenset(self.terms.items())))

    def _check(self, other: "Element"):
        if other.graph is not self.graph and other.graph != self.graph:
            raise AlgebraError("operands live on different graphs")

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            s = terms.get(k, 0) + c
            if s:
                terms[k] = coeff(s)
            else:
                terms.pop(k, None)
        return Element._raw(self.graph, terms, coeff(self.unit + other.unit))

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "Element":
        c = coeff(c)
        if not c:
            return zero(self.graph)
        return Element._raw(self.graph, {k: coeff(v * c) for k, v in self.terms.items()},
                            coeff(self.unit * c))

    def __mul__(self, other):
        if isinstance(other, Element):
            return multiply(self, other)
        try:
            return self.scale(other)
        except TypeError:
            return NotImplemented

    def __rmul__(self, other):
        try:
            return self.scale(other)
        except TypeError:
            return NotImplemented

    def __matmul__(self, other):
        return multiply(self, other)

    @property
    def adj(self) -> "Element":
        return adjoint(self)

    def __repr__(self):
        return f"Element({self})"

    def __str__(self):
        parts = []
        if self.unit:
            parts.append(_with_coeff(self.unit, "one"))
        for (mu, nu), c in self.items():
            parts.append(_with_coeff(c, _term_text(mu, nu)))
        if not parts:
            return "0"
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


def _term_text(mu: Path, nu: Path) -> str:
    if mu.is_vertex and nu.is_vertex:
        return f"p({mu.source})"
    if nu.is_vertex:
        return f"S({' '.join(mu.edges)})"
    if mu.is_vertex:
        return f"adj(S({' '.join(nu.edges)}))"
    return f"S({' '.join(mu.edges)}) * adj(S({' '.join(nu.edges)}))"


def _with_coeff(c, text: str) -> str:
    c = coeff(c)
    if c == 1:
        return text
    if c == -1:
        return "-" + text
    if isinstance(c, GaussianRational):
        return f"({format_coeff(c)}) * {text}"
    return f"{format_coeff(c)} * {text}"


# constructors --------------------------------------------------------------

def zero(graph: Graph) -> Element:
    return Element._raw(graph, {}, Fraction(0))


def one(graph: Graph) -> Element:
    """The adjoined unit ``1+``."""
    return Element._raw(graph, {}, Fraction(1))


def p(graph: Graph, v: str) -> Element:
    vp = graph.vertex_path(v)
    return Element._raw(graph, {(vp, vp): Fraction(1)}, Fraction(0))


def _as_path(graph: Graph, path) -> Path:
    if isinstance(path, Path):
        return path
    if isinstance(path, str):
        path = path.split()
    return graph.path(path)


def S(graph: Graph, path) -> Element:
    """``S_mu`` for a path given as a :class:`Path`, edge-id list or string."""
    mu = _as_path(graph, path)
    return Element._raw(graph, {(mu, graph.vertex_path(mu.range)): Fraction(1)}, Fraction(0))


def term(graph: Graph, mu, nu, c=1) -> Element:
    """``c * S_mu S_nu^*``."""
    mu = _as_path(graph, mu)
    nu = _as_path(graph, nu)
    return Element(graph, {(mu, nu): c})


def from_terms(graph: Graph, items: Iterable[tuple[Key, object]], unit=0) -> Element:
    terms: dict[Key, Coeff] = {}
    for k, c in items:
        s = terms.get(k, 0) + coeff(c)
        if s:
            terms[k] = coeff(s)
        else:
            terms.pop(k, None)
    return Element(graph, terms, unit)


# products ------------------------------------------------------------------

def term_product(a: Key, b: Key) -> Key | None:
    """``(S_mu S_nu^*)(S_alpha S_beta^*)`` as a single term key, or ``None`` for 0."""
    mu, nu = a
    alpha, beta = b
    if nu.is_prefix_of(alpha):
        return (mu.then(nu.remainder(alpha)), beta)
    if alpha.is_prefix_of(nu):
        return (mu, beta.then(alpha.remainder(nu)))
    return None


def multiply(a: Element, b: Element) -> Element:
    a._check(b)
    acc: dict[Key, Coeff] = defaultdict(Fraction)
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            k = term_product(ka, kb)
            if k is not None:
                acc[k] += ca * cb
    if b.unit:
        for k, c in a.terms.items():
            acc[k] += c * b.unit
    if a.unit:
        for k, c in b.terms.items():
            acc[k] += a.unit * c
    terms = {k: coeff(c) for k, c in acc.items() if c}
    return Element._raw(a.graph, terms, coeff(a.unit * b.unit))


def adjoint(a: Element) -> Element:
    return Element._raw(a.graph, {(nu, mu): conj(c) for (mu, nu), c in a.terms.items()},
                        conj(a.unit))


# grading -------------------------------------------------------------------

def degree(key: Key) -> int:
    return len(key[0]) - len(key[1])


def grade(a: Element) -> dict[int, Element]:
    """Degree components ``{k: Phi_k(a)}`` (only nonzero ones)."""
    parts: dict[int, dict] = defaultdict(dict)
    for k, c in a.terms.items():
        parts[degree(k)][k] = c
    out = {d: Element._raw(a.graph, t, Fraction(0)) for d, t in parts.items()}
    if a.unit:
        base = out.get(0, zero(a.graph))
        out[0] = Element._raw(a.graph, base.terms, a.unit)
    return dict(sorted(out.items()))


def phi_k(a: Element, k: int) -> Element:
    """Keep exactly the degree-``k`` terms (the unit has degree 0)."""
    terms = {key: c for key, c in a.terms.items() if degree(key) == k}
    return Element._raw(a.graph, terms, a.unit if k == 0 else Fraction(0))


def expectation(a: Element) -> Element:
    return phi_k(a, 0)


def gauge_derivative(a: Element) -> Element:
    """``[D, a]`` as an element: each term scaled by its degree."""
    return Element._raw(a.graph, {k: coeff(c * degree(k)) for k, c in a.terms.items() if degree(k)},
                        Fraction(0))


def local_unit(a: Element) -> Element:
    """Sum of ``p_v`` over the sources of all ``mu`` and ``nu`` in ``a``."""
    if a.unit:
        raise AlgebraError("local units are defined for elements without a unit part")
    verts = {mu.source for mu, _ in a.terms} | {nu.source for _, nu in a.terms}
    g = a.graph
    vp = {v: g.vertex_path(v) for v in verts}
    return Element._raw(g, {(vp[v], vp[v]): Fraction(1) for v in verts}, Fraction(0))


# equality modulo the Cuntz-Krieger relation ----------------------------------

def normal_form(a: Element) -> dict[Key, Coeff]:
    """Canonical representative of the non-unit part modulo CK relations.

    With ``M`` the longest ``nu`` occurring in ``a``, every term is expanded by
    ``S_mu S_nu^* = sum_{s(e)=r(mu)} S_{mu e} S_{nu e}^*`` until ``|nu| == M``
    or ``r(mu)`` is a sink.  The terms that can appear after this are
    linearly independent in the graph algebra: fix a degree ``d``; evaluate
    on the boundary-path representation at a vector ``nu x`` with ``x`` a
    boundary path from ``r(nu)``.  Only terms with that exact ``nu`` act
    nontrivially (a shorter ``nu'`` ending at a sink cannot be a proper
    prefix of a longer path) and they send it to the distinct vectors
    ``mu x`` (all ``mu`` have length ``|nu| + d``).  So a combination is zero
    in the algebra iff its normal form is empty.
    """
    if not a.terms:
        return {}
    g = a.graph
    target = max(len(nu) for _, nu in a.terms)
    out: dict[Key, Coeff] = defaultdict(Fraction)
    stack = list(a.terms.items())
    while stack:
        (mu, nu), c = stack.pop()
        w = mu.range
        if len(nu) >= target or g.is_sink(w):
            out[(mu, nu)] += c
            continue
        for e in g.out_edges[w]:
            step = Path(w, (e.id,), e.range)
            stack.append(((mu.then(step), nu.then(step)), c))
    return {k: coeff(c) for k, c in out.items() if c}


def is_zero_in_algebra(a: Element) -> bool:
    return not a.unit and not normal_form(a)


def relation_equal(a: Element, b: Element) -> bool:
    return is_zero_in_algebra(a - b)


def collapse(a: Element) -> Element:
    """Fold complete CK families back into shorter terms.

    Starting from the normal form, any family ``{c S_{mu e} S_{nu e}^* :
    s(e) = w}`` covering every edge out of ``w`` with one shared coefficient
    is replaced by ``c S_mu S_nu^*``; repeated until nothing folds.  The
    result is relation-equal to ``a`` and usually much shorter, e.g. it
    turns ``S_e S_e^*`` on the circle graph into ``p_v``.
    """
    g = a.graph
    terms = dict(normal_form(a))
    changed = True
    while changed:
        changed = False
        groups: dict[Key, list[Key]] = defaultdict(list)
        for mu, nu in terms:
            if mu.edges and nu.edges and mu.edges[-1] == nu.edges[-1]:
                e = g.edge[mu.edges[-1]]
                parent = (Path(mu.source, mu.edges[:-1], e.source),
                          Path(nu.source, nu.edges[:-1], e.source))
                groups[parent].append((mu, nu))
        for parent in sorted(groups, key=term_sort_key, reverse=True):
            kids = groups[parent]
            w = parent[0].range
            if len(kids) != len(g.out_edges[w]):
                continue
            vals = {terms.get(k) for k in kids}
            if len(vals) != 1 or None in vals:
                continue
            c = vals.pop()
            for k in kids:
                del terms[k]
            terms[parent] = coeff(terms.get(parent, 0) + c)
            if not terms[parent]:
                del terms[parent]
            changed = True
            break
    return Element._raw(g, terms, a.unit)


def is_projection(a: Element) -> bool:
    return relation_equal(a, adjoint(a)) and relation_equal(multiply(a, a), a)


def is_unitary(a: Element) -> bool:
    u = one(a.graph)
    return relation_equal(multiply(a, adjoint(a)), u) and relation_equal(multiply(adjoint(a), a), u)


__all__ = [
    "AlgebraError", "Coeff", "Element", "GaussianRational", "GraphError", "I", "Key",
    "S", "adjoint", "coeff", "collapse", "conj", "degree", "expectation", "format_coeff",
    "format_rational", "from_terms", "gauge_derivative", "grade", "is_projection",
    "is_unitary", "is_zero_in_algebra", "local_unit", "multiply", "normal_form", "one",
    "p", "phi_k", "relation_equal", "term", "term_product", "term_sort_key", "zero",
]
