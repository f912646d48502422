"""Finite truncations of the Hilbert space ``H = L^2(X, tau_g)``.

The raw spanning family at depth ``L`` is every term ``S_mu S_nu^*`` with
``|mu|, |nu| <= L``.  Terms of different gauge degree are orthogonal, so the
family splits into degree blocks ``-L..L``.  Inside a block, terms are offered
in a fixed order (``|mu|``, then edge ids) to an exact greedy Gram selection;
rejected terms keep their exact expansion in the chosen ones.

Vectors are sparse coordinate dicts ``basis index -> coefficient``.  An
element whose terms leave the raw family (paths longer than ``L``) is
projected onto its degree block; an exact norm comparison decides whether
the projection loses anything, and if it does the image is marked as leaked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import algebra as alg
from . import linalg
from .graph import Graph, Path, paths_into
from .traces import GraphTrace, TraceError, check_graph_trace, term_inner

Vec = dict


class ModuleError(ValueError):
    pass


class TruncatedModule:
    """Gauge-graded truncation of ``H`` at depth ``L``."""

    def __init__(self, graph: Graph, trace: GraphTrace, depth: int):
        if depth < 1:
            raise ModuleError("module depth must be at least 1")
        check = check_graph_trace(graph, trace)
        if not check.valid:
            raise TraceError(f"not a graph trace at {', '.join(v.vertex for v in check.violations)}")
        self.graph = graph
        self.trace = trace
        self.depth = depth
        self.tv = trace.values
        raw: dict[int, list[alg.Key]] = {k: [] for k in range(-depth, depth + 1)}
        for w in graph.vertices:
            into = [p for k in range(depth + 1) for p in paths_into(graph, w, k)]
            for mu in into:
                for nu in into:
                    raw[len(mu) - len(nu)].append((mu, nu))
        self.basis: list[alg.Key] = []
        self.degree_of: list[int] = []
        self.blocks: dict[int, range] = {}
        self.coords: dict[alg.Key, Vec] = {}
        self.block_inv: dict[int, list[list]] = {}
        for k in range(-depth, depth + 1):
            terms = sorted(raw[k], key=alg.term_sort_key)
            start = len(self.basis)
            chosen: list[alg.Key] = []
            sel = linalg.GramBasis()
            for t in terms:
                b = [term_inner(c, t, self.tv) for c in chosen]
                c = term_inner(t, t, self.tv)
                x = sel.offer(b, c)
                if x is None:
                    self.coords[t] = {start + len(chosen): Fraction(1)}
                    chosen.append(t)
                else:
                    self.coords[t] = {start + i: v for i, v in enumerate(x) if v}
            self.basis.extend(chosen)
            self.degree_of.extend([k] * len(chosen))
            self.blocks[k] = range(start, start + len(chosen))
            self.block_inv[k] = sel.inv
        self.block_gram: dict[int, list[list]] = {}
        for k, rng in self.blocks.items():
            keys = [self.basis[i] for i in rng]
            self.block_gram[k] = [[term_inner(a, b, self.tv) for b in keys] for a in keys]
        self.n_raw = sum(len(v) for v in raw.values())

    # basics ----------------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.basis)

    def __repr__(self):
        return f"TruncatedModule(depth={self.depth}, dim={self.dim})"

    def depth_of(self, i: int) -> int:
        mu, nu = self.basis[i]
        return max(len(mu), len(nu))

    def indices(self, degrees=None, max_depth: int | None = None) -> list[int]:
        out = []
        for i in range(self.dim):
            if degrees is not None and self.degree_of[i] not in degrees:
                continue
            if max_depth is not None and self.depth_of(i) > max_depth:
                continue
            out.append(i)
        return out

    def interior(self, d: int) -> list[int]:
        """Basis vectors an operator of path length ``d`` cannot push past depth ``L``."""
        return self.indices(max_depth=self.depth - d)

    def element(self, i: int) -> alg.Element:
        return alg.Element._raw(self.graph, {self.basis[i]: Fraction(1)}, Fraction(0))

    def vector_element(self, vec: Vec) -> alg.Element:
        return alg.from_terms(self.graph, ((self.basis[i], c) for i, c in vec.items()))

    def gram(self, i: int, j: int):
        di, dj = self.degree_of[i], self.degree_of[j]
        if di != dj:
            return Fraction(0)
        s = self.blocks[di].start
        return self.block_gram[di][i - s][j - s]

    def inner(self, x: Vec, y: Vec):
        """``<x, y>`` for coordinate vectors (conjugate-linear in ``x``)."""
        total = Fraction(0)
        for i, a in x.items():
            k = self.degree_of[i]
            s = self.blocks[k].start
            row = self.block_gram[k][i - s]
            for j, b in y.items():
                if self.degree_of[j] == k:
                    g = row[j - s]
                    if g:
                        total += alg.conj(a) * g * b
        return alg.coeff(total)

    # expressing elements -----------------------------------------------------
    def express(self, x: alg.Element) -> tuple[Vec, bool]:
        """Coordinates of ``x`` and whether part of it falls outside the truncation."""
        if x.unit:
            raise ModuleError("the adjoined unit is an operator, not a vector of H")
        out: dict[int, object] = {}
        outside: dict[int, dict] = {}
        for key, c in x.terms.items():
            vec = self.coords.get(key)
            if vec is None:
                outside.setdefault(alg.degree(key), {})[key] = c
                continue
            for i, v in vec.items():
                out[i] = out.get(i, 0) + c * v
        leak = False
        for k, part in outside.items():
            proj, exact = self._project(k, part)
            leak = leak or not exact
            for i, v in proj.items():
                out[i] = out.get(i, 0) + v
        return {i: alg.coeff(v) for i, v in out.items() if v}, leak

    def _project(self, k: int, part: dict) -> tuple[Vec, bool]:
        norm2 = Fraction(0)
        items = list(part.items())
        for a, ca in items:
            for b, cb in items:
                g = term_inner(a, b, self.tv)
                if g:
                    norm2 += alg.conj(ca) * cb * g
        if k not in self.blocks or not self.blocks[k]:
            return {}, not norm2
        rng = self.blocks[k]
        b = []
        for i in rng:
            key = self.basis[i]
            b.append(alg.coeff(sum((c * term_inner(key, t, self.tv) for t, c in items), Fraction(0))))
        x = linalg.matvec(self.block_inv[k], b)
        captured = alg.coeff(sum((alg.conj(bi) * xi for bi, xi in zip(b, x)), Fraction(0)))
        return {rng.start + i: v for i, v in enumerate(x) if v}, alg.coeff(norm2) == captured

    def to_json(self, operators: dict | None = None) -> dict:
        fmt = alg.format_coeff
        blocks = []
        for k, rng in self.blocks.items():
            blocks.append({
                "degree": k,
                "basis": [[list(self.basis[i][0].edges) or [self.basis[i][0].source],
                           list(self.basis[i][1].edges) or [self.basis[i][1].source]] for i in rng],
                "terms": [alg._term_text(*self.basis[i]) for i in rng],
                "gram": [[fmt(x) for x in row] for row in self.block_gram[k]],
            })
        out = {"depth": self.depth, "dimension": self.dim, "raw_terms": self.n_raw, "blocks": blocks}
        if operators:
            out["operators"] = {name: op.to_json() for name, op in operators.items()}
        return out


def build_module(graph: Graph, tr: GraphTrace, depth: int) -> TruncatedModule:
    return TruncatedModule(graph, tr, depth)


# operators -------------------------------------------------------------------

class OperatorMatrix:
    """Exact operator on a truncated module, stored column by column.

    ``cols[j]`` holds the coordinates of the image of basis vector ``j``;
    ``leak[j]`` is set when that image could not be represented exactly.
    """

    def __init__(self, module: TruncatedModule, cols: list[Vec], leak: list[bool] | None = None):
        self.module = module
        self.cols = cols
        self.leak = leak if leak is not None else [False] * len(cols)

    @property
    def dim(self) -> int:
        return len(self.cols)

    def trusted(self) -> list[int]:
        return [j for j, bad in enumerate(self.leak) if not bad]

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        cols = []
        leak = []
        for j, col in enumerate(other.cols):
            acc: dict[int, object] = {}
            bad = other.leak[j]
            for i, c in col.items():
                bad = bad or self.leak[i]
                for r, v in self.cols[i].items():
                    acc[r] = acc.get(r, 0) + c * v
            cols.append({r: alg.coeff(v) for r, v in acc.items() if v})
            leak.append(bad)
        return OperatorMatrix(self.module, cols, leak)

    def _combine(self, other, sign):
        cols = []
        for a, b in zip(self.cols, other.cols):
            acc = dict(a)
            for r, v in b.items():
                nv = alg.coeff(acc.get(r, 0) + sign * v)
                if nv:
                    acc[r] = nv
                else:
                    acc.pop(r, None)
            cols.append(acc)
        return OperatorMatrix(self.module, cols, [x or y for x, y in zip(self.leak, other.leak)])

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def scale(self, c) -> "OperatorMatrix":
        c = alg.coeff(c)
        return OperatorMatrix(self.module, [{r: alg.coeff(v * c) for r, v in col.items() if v * c}
                                            for col in self.cols], list(self.leak))

    def apply(self, vec: Vec) -> tuple[Vec, bool]:
        acc: dict[int, object] = {}
        bad = False
        for i, c in vec.items():
            bad = bad or self.leak[i]
            for r, v in self.cols[i].items():
                acc[r] = acc.get(r, 0) + c * v
        return {r: alg.coeff(v) for r, v in acc.items() if v}, bad

    def dense(self):
        n = self.dim
        out = [[Fraction(0)] * n for _ in range(n)]
        for j, col in enumerate(self.cols):
            for i, v in col.items():
                out[i][j] = v
        return out

    def to_numpy(self) -> np.ndarray:
        complex_ = any(isinstance(v, alg.GaussianRational) for col in self.cols for v in col.values())
        arr = np.zeros((self.dim, self.dim), dtype=complex if complex_ else float)
        for j, col in enumerate(self.cols):
            for i, v in col.items():
                arr[i, j] = complex(float(v.real), float(v.imag)) if isinstance(v, alg.GaussianRational) else float(v)
        return arr

    def gram_adjoint(self) -> "OperatorMatrix":
        """Adjoint with respect to the module inner product: ``G^{-1} M^* G``."""
        m = self.module
        n = self.dim
        # (T^*)_{ij} = sum_{a,b} Ginv_{ia} conj(M_{ba}) G_{bj}
        cols = []
        leak = [any(self.leak)] * n if any(self.leak) else [False] * n
        for j in range(n):
            # w_a = <T b_a, b_j> = sum_b conj(M_ba) G_bj
            kj = m.degree_of[j]
            w: dict[int, object] = {}
            for a, col in enumerate(self.cols):
                s = 0
                for b, v in col.items():
                    if m.degree_of[b] == kj:
                        g = m.gram(b, j)
                        if g:
                            s += alg.conj(v) * g
                if s:
                    w[a] = s
            out: dict[int, object] = {}
            for a, val in w.items():
                ka = m.degree_of[a]
                st = m.blocks[ka].start
                inv = m.block_inv[ka]
                for i in m.blocks[ka]:
                    x = inv[i - st][a - st]
                    if x:
                        out[i] = out.get(i, 0) + x * val
            cols.append({i: alg.coeff(v) for i, v in out.items() if v})
        return OperatorMatrix(m, cols, leak)

    def equal_on(self, other: "OperatorMatrix", cols=None) -> bool:
        cols = range(self.dim) if cols is None else cols
        return all(self.cols[j] == other.cols[j] for j in cols)

    def is_zero_on(self, cols=None) -> bool:
        cols = range(self.dim) if cols is None else cols
        return all(not self.cols[j] for j in cols)

    def to_json(self) -> dict:
        return {
            "columns": [{str(i): alg.format_coeff(v) for i, v in sorted(col.items())} for col in self.cols],
            "leak": [j for j, bad in enumerate(self.leak) if bad],
        }


def _from_images(m: TruncatedModule, f) -> OperatorMatrix:
    cols, leak = [], []
    for j in range(m.dim):
        vec, bad = m.express(f(m.element(j)))
        cols.append(vec)
        leak.append(bad)
    return OperatorMatrix(m, cols, leak)


def left_mult(a: alg.Element, m: TruncatedModule) -> OperatorMatrix:
    """Matrix of ``z -> a z``; the adjoined unit acts as the identity."""
    return _from_images(m, lambda z: alg.multiply(a, z))


def rank_one(x: alg.Element, y: alg.Element, m: TruncatedModule) -> OperatorMatrix:
    """``Theta_{x,y} : z -> x Phi(y^* z)``."""
    ya = alg.adjoint(y)
    return _from_images(m, lambda z: alg.multiply(x, alg.expectation(alg.multiply(ya, z))))


def diagonal(m: TruncatedModule, f) -> OperatorMatrix:
    cols = []
    for j in range(m.dim):
        v = alg.coeff(f(m.degree_of[j]))
        cols.append({j: v} if v else {})
    return OperatorMatrix(m, cols)


def D_matrix(m: TruncatedModule) -> OperatorMatrix:
    return diagonal(m, lambda k: k)


def absD_matrix(m: TruncatedModule) -> OperatorMatrix:
    return diagonal(m, abs)


def phi_k_matrix(m: TruncatedModule, k: int) -> OperatorMatrix:
    return diagonal(m, lambda d: 1 if d == k else 0)


def positive_projection(m: TruncatedModule) -> OperatorMatrix:
    """``P``: projection onto degrees ``>= 1``."""
    return diagonal(m, lambda d: 1 if d >= 1 else 0)


def _exact_power(base: int, s: Fraction) -> Fraction | None:
    """``base ** (-s)`` when it is rational, else ``None``."""
    if s.denominator == 1:
        return Fraction(1, base ** int(s)) if s >= 0 else Fraction(base ** int(-s))
    root = round(base ** (1 / s.denominator))
    for r in (root - 1, root, root + 1):
        if r > 0 and r ** s.denominator == base:
            e = s.numerator
            return Fraction(1, r ** e) if e >= 0 else Fraction(r ** -e)
    return None


def resolvent_power(m: TruncatedModule, s) -> OperatorMatrix | np.ndarray:
    """``(1 + D^2)^{-s}``: exact when every entry is rational, else a float array."""
    s = Fraction(s)
    vals = {k: _exact_power(1 + k * k, s) for k in m.blocks}
    if all(v is not None for v in vals.values()):
        return diagonal(m, lambda k: vals[k])
    return np.diag([(1.0 + k * k) ** (-float(s)) for k in m.degree_of])


def V_matrix(m: TruncatedModule) -> np.ndarray:
    """``V = D (1 + D^2)^{-1/2}`` as a float diagonal matrix."""
    return np.diag([k / math.sqrt(1.0 + k * k) for k in m.degree_of])


# norms -----------------------------------------------------------------------

def _float(v) -> complex:
    if isinstance(v, alg.GaussianRational):
        return complex(float(v.real), float(v.imag))
    return float(v)


def _gram_factor(m: TruncatedModule, idx: list[int]) -> np.ndarray:
    """Float ``R`` with ``G_idx = R^* R`` from an exact LDL factorisation.

    Factors are cached on the module per index set; norms of many operators
    on the same module then reuse them.
    """
    key = tuple(idx)
    cache = m.__dict__.setdefault("_factor_cache", {})
    if key in cache:
        return cache[key]
    n = len(idx)
    R = np.zeros((n, n), dtype=complex)
    by_block: dict[int, list[int]] = {}
    for pos, i in enumerate(idx):
        by_block.setdefault(m.degree_of[i], []).append(pos)
    for k, positions in by_block.items():
        members = [idx[a] for a in positions]
        start = m.blocks[k].start
        if members == list(range(start, start + len(members))):
            # a leading run of the block: slice the factor of the whole block
            L, d = _block_ldl(m, k)
        else:
            L, d = linalg.ldl([[m.gram(a, b) for b in members] for a in members])
        for r, a in enumerate(positions):
            root = math.sqrt(float(d[r]))
            for c, b in enumerate(positions):
                # R = sqrt(D) L^*
                R[a, b] = root * np.conj(_float(L[c][r]))
    cache[key] = R
    return R


def _block_ldl(m: TruncatedModule, k: int):
    cache = m.__dict__.setdefault("_ldl_cache", {})
    if k not in cache:
        cache[k] = linalg.ldl(m.block_gram[k])
    return cache[k]


def operator_norm(op: OperatorMatrix, cols: list[int] | None = None) -> float:
    """Norm of ``op`` restricted to ``span{basis[j] : j in cols}``."""
    m = op.module
    cols = op.trusted() if cols is None else cols
    if not cols:
        return 0.0
    touched = {m.degree_of[i] for j in cols for i in op.cols[j]}
    if not touched:
        return 0.0
    # whole output blocks: the norm of an image does not depend on extra zero rows
    rows = [i for k in sorted(touched) for i in m.blocks[k]]
    M = np.zeros((len(rows), len(cols)), dtype=complex)
    rpos = {r: a for a, r in enumerate(rows)}
    for b, j in enumerate(cols):
        for i, v in op.cols[j].items():
            M[rpos[i], b] = _float(v)
    R_out = _gram_factor(m, rows)
    R_in = _gram_factor(m, list(cols))
    T = R_out @ M @ np.linalg.inv(R_in)
    return float(np.linalg.svd(T, compute_uv=False)[0])


@dataclass(frozen=True)
class CommutatorCheck:
    norm: float
    bound: int
    tolerance: float
    columns: int

    @property
    def ok(self) -> bool:
        return self.norm <= self.bound + self.tolerance


def commutator_norm_check(a, m: TruncatedModule, tol: float = 1e-9) -> CommutatorCheck:
    """Norm of ``[|D|, a]`` for a single term, against ``||mu| - |nu||``."""
    if isinstance(a, tuple):
        mu, nu = a
        a = alg.Element(m.graph, {(mu, nu): 1})
    if len(a.terms) != 1 or a.unit:
        raise ModuleError("commutator check expects a single term S_mu S_nu^*")
    (mu, nu), = a.terms
    A = left_mult(a, m)
    absD = absD_matrix(m)
    C = absD @ A - A @ absD
    cols = [j for j in m.interior(max(len(mu), len(nu))) if not C.leak[j]]
    return CommutatorCheck(operator_norm(C, cols), abs(len(mu) - len(nu)), tol, len(cols))


def dump_module_json(m: TruncatedModule, operators: dict | None = None) -> str:
    return json.dumps(m.to_json(operators), sort_keys=True, indent=2)


def path_vector(m: TruncatedModule, mu: Path, adjoint: bool = False) -> Vec:
    """Coordinates of ``S_mu`` (or ``S_mu^*``)."""
    e = alg.S(m.graph, mu)
    vec, bad = m.express(alg.adjoint(e) if adjoint else e)
    if bad:
        raise ModuleError(f"S({mu}) is not representable at depth {m.depth}")
    return vec
