"""Exact dense linear algebra over the rationals or Gaussian rationals.

Matrices are lists of rows.  Entries may be ``Fraction`` or
``GaussianRational``; nothing here rounds.  Pivoting is the first nonzero
entry in column order, so results are reproducible run to run.
"""

from __future__ import annotations

from fractions import Fraction

from .algebra import coeff, conj

ZERO = Fraction(0)
ONE = Fraction(1)


def copy(m):
    return [list(row) for row in m]


def identity(n: int):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def conj_transpose(m):
    if not m:
        return []
    return [[conj(m[i][j]) for i in range(len(m))] for j in range(len(m[0]))]


def matmul(a, b):
    if not a or not b:
        return [[] for _ in a] if a else []
    inner = len(b)
    cols = len(b[0])
    out = []
    for row in a:
        acc = [ZERO] * cols
        for k in range(inner):
            x = row[k]
            if x:
                bk = b[k]
                for j in range(cols):
                    if bk[j]:
                        acc[j] += x * bk[j]
        out.append([coeff(v) for v in acc])
    return out


def matvec(a, x):
    return [coeff(sum((r * v for r, v in zip(row, x) if r and v), ZERO)) for row in a]


def rref(m):
    """Reduced row echelon form and the pivot columns."""
    a = copy(m)
    rows = len(a)
    cols = len(a[0]) if a else 0
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if a[i][c]), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c] if not isinstance(a[r][c], Fraction) else ONE / a[r][c]
        a[r] = [coeff(x * inv) for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [coeff(x - f * y) for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m) -> int:
    return len(rref(m)[1]) if m and m[0] else 0


def nullspace(m, ncols: int | None = None):
    """Basis of ``{x : m x = 0}``, one vector per free column."""
    if not m:
        n = ncols or 0
        return [[ONE if i == j else ZERO for i in range(n)] for j in range(n)]
    red, pivots = rref(m)
    n = len(m[0])
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        x = [ZERO] * n
        x[f] = ONE
        for r, pc in enumerate(pivots):
            x[pc] = coeff(-red[r][f])
        basis.append(x)
    return basis


def inverse(m):
    n = len(m)
    aug = [list(row) + e for row, e in zip(m, identity(n))]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red]


def solve(m, b):
    """Solve ``m x = b`` for square invertible ``m``."""
    n = len(m)
    aug = [list(row) + [bi] for row, bi in zip(m, b)]
    red, pivots = rref(aug)
    if pivots != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n] for row in red]


def ldl(m):
    """``m = L diag(d) L^*`` for Hermitian positive definite ``m``.

    Returns ``(L, d)`` with ``L`` unit lower triangular.  Raises
    ``ValueError`` if a pivot is not strictly positive.
    """
    n = len(m)
    L = identity(n)
    d = [ZERO] * n
    real = all(isinstance(x, Fraction) for row in m for x in row)
    for j in range(n):
        Lj = L[j]
        # w_k = conj(L[j][k]) d[k], shared by every row below j
        w = [(Lj[k] if real else conj(Lj[k])) * d[k] for k in range(j)]
        s = coeff(m[j][j] - sum((Lj[k] * w[k] for k in range(j) if w[k]), ZERO))
        if isinstance(s, Fraction):
            val = s
        else:
            if s.imag:
                raise ValueError("matrix is not Hermitian")
            val = s.real
        if val <= 0:
            raise ValueError("matrix is not positive definite")
        d[j] = val
        nz = [k for k in range(j) if w[k]]
        for i in range(j + 1, n):
            Li = L[i]
            t = m[i][j] - sum((Li[k] * w[k] for k in nz if Li[k]), ZERO)
            L[i][j] = coeff(t / val) if t else ZERO
    return L, d


class GramBasis:
    """Greedy selection of an independent subfamily, one vector at a time.

    Keeps the exact inverse of the Gram matrix of the accepted vectors and
    grows it with the bordered-inverse update.  A candidate is rejected when
    its Schur complement vanishes, i.e. it lies in the span already chosen;
    its expansion in the chosen vectors is then returned.
    """

    def __init__(self):
        self.size = 0
        self.inv: list[list] = []

    def offer(self, b, c):
        """``b[i] = <chosen_i, t>``, ``c = <t, t>``.

        Returns ``None`` if ``t`` was accepted, else the coefficient list
        ``x`` with ``t = sum x_i chosen_i``.
        """
        w = matvec(self.inv, b) if self.size else []
        s = coeff(c - sum((conj(bi) * wi for bi, wi in zip(b, w) if bi and wi), ZERO))
        if not s:
            return w
        inv_s = ONE / s if isinstance(s, Fraction) else 1 / s
        n = self.size
        new = []
        for i in range(n):
            wi = w[i]
            row = self.inv[i]
            if wi:
                f = wi * inv_s
                new.append([coeff(row[j] + f * conj(w[j])) for j in range(n)] + [coeff(-f)])
            else:
                new.append(list(row) + [ZERO])
        new.append([coeff(-conj(w[j]) * inv_s) for j in range(n)] + [coeff(inv_s)])
        self.inv = new
        self.size += 1
        return None


def sparse_nullspace(vectors):
    """Null combinations of sparse vectors.

    ``vectors[j]`` is a dict ``index -> entry``.  Returns ``(rank, null)``
    where ``null`` is a list of dicts ``j -> x_j`` with ``sum_j x_j
    vectors[j] = 0``, forming a basis of all such combinations.

    Pivots are kept in creation order; each new pivot vector is already
    reduced against all earlier ones, so one pass in that order clears every
    pivot row from an incoming vector.
    """
    pivots: list[tuple[int, dict, dict]] = []
    pivot_rows: set[int] = set()
    null = []
    for j, vec in enumerate(vectors):
        cur = {r: v for r, v in vec.items() if v}
        combo = {j: ONE}
        if pivot_rows.intersection(cur):
            for prow, pvec, pcombo in pivots:
                f = cur.get(prow)
                if not f:
                    continue
                f = coeff(f / pvec[prow])
                for r, v in pvec.items():
                    nv = coeff(cur.get(r, ZERO) - f * v)
                    if nv:
                        cur[r] = nv
                    else:
                        cur.pop(r, None)
                for c, v in pcombo.items():
                    nv = coeff(combo.get(c, ZERO) - f * v)
                    if nv:
                        combo[c] = nv
                    else:
                        combo.pop(c, None)
        if cur:
            prow = min(cur)
            pivots.append((prow, cur, combo))
            pivot_rows.add(prow)
        else:
            null.append(combo)
    return len(pivots), null
