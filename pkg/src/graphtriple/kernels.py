"""Backend dispatch for the numeric inner loops.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
pure-Python module ``_pykernels`` is used.  Setting the environment variable
``GRAPHTRIPLE_PURE_PYTHON=1`` forces the fallback.

Two loops live here:

``resolvent_partial_sum``
    the weighted sum over degrees behind the Dixmier partial sums, run for
    ``N`` up to millions of terms;
``walk_counts``
    path counts by length from the adjacency matrix (``|v|_k`` and its
    outgoing twin).  The compiled loop works in int64 and hands over to the
    exact Python loop if a count would overflow.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("GRAPHTRIPLE_PURE_PYTHON"):
    _ck = None
else:
    try:
        from . import _ckernels as _ck
    except ImportError:
        _ck = None

BACKEND = "cython" if _ck is not None else "python"


def resolvent_partial_sum(head, tail, negative, n_terms, backend=None):
    """Return ``sum_{k=-N}^{N} t_k (1+k^2)^{-1/2}``.

    ``t_k`` is ``head[k]`` for ``0 <= k < len(head)``, ``tail`` for larger
    ``k`` and ``negative`` for every ``k < 0``.
    """
    backend = backend or BACKEND
    head = [float(x) for x in head]
    if backend == "cython":
        import numpy as np

        return _ck.resolvent_partial_sum(
            np.ascontiguousarray(head, dtype=np.float64), float(tail), float(negative), int(n_terms)
        )
    return _pykernels.resolvent_partial_sum(head, float(tail), float(negative), int(n_terms))


def walk_counts(adjacency, steps, incoming=False, backend=None):
    """Path counts ``out[k][v]`` for ``k = 0..steps``.

    ``adjacency[v][w]`` is the number of edges ``v -> w``.  With
    ``incoming=False`` the count is of paths of length ``k`` starting at
    ``v``; with ``incoming=True`` of paths ending at ``v``.
    """
    backend = backend or BACKEND
    if backend == "cython":
        import numpy as np

        arr = np.ascontiguousarray(adjacency, dtype=np.int64).reshape(len(adjacency), len(adjacency))
        try:
            return _ck.walk_counts(arr, int(steps), bool(incoming)).tolist()
        except OverflowError:
            pass
    return _pykernels.walk_counts([list(map(int, row)) for row in adjacency], int(steps), bool(incoming))


def available_backends():
    return ["cython", "python"] if _ck is not None else ["python"]
