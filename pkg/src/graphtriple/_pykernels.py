"""Pure-Python versions of the compiled kernels in ``_ckernels.pyx``."""

from __future__ import annotations

import math


def resolvent_partial_sum(head, tail, negative, n_terms):
    h = len(head)
    total = 0.0
    for k in range(n_terms + 1):
        w = 1.0 / math.sqrt(1.0 + float(k) * float(k))
        t = head[k] if k < h else tail
        total += t * w
        if k > 0:
            total += negative * w
    return total


def walk_counts(adj, steps, incoming):
    n = len(adj)
    out = [[1] * n]
    for _ in range(steps):
        prev = out[-1]
        row = []
        for v in range(n):
            if incoming:
                row.append(sum(adj[w][v] * prev[w] for w in range(n) if adj[w][v]))
            else:
                row.append(sum(adj[v][w] * prev[w] for w in range(n) if adj[v][w]))
        out.append(row)
    return out
