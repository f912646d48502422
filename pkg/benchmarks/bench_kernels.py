"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import random
import timeit

from graphtriple import kernels


def _cases():
    rng = random.Random(0)
    head = [rng.uniform(0, 3) for _ in range(12)]
    n = 40
    adjacency = [[int(rng.random() < 0.08) for _ in range(n)] for _ in range(n)]
    return [
        ("resolvent_partial_sum N=1e5", lambda b: kernels.resolvent_partial_sum(head, 2.0, 1.0, 10**5, backend=b)),
        ("resolvent_partial_sum N=1e6", lambda b: kernels.resolvent_partial_sum(head, 2.0, 1.0, 10**6, backend=b)),
        ("walk_counts 40 vertices, 30 steps", lambda b: kernels.walk_counts(adjacency, 30, backend=b)),
        ("walk_counts incoming", lambda b: kernels.walk_counts(adjacency, 30, incoming=True, backend=b)),
    ]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    print(f"{'kernel':38s}" + "".join(f"{b:>12s}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, fn in _cases():
        results = {b: fn(b) for b in backends}
        if len(set(map(repr, results.values()))) > 1 and "walk" in name:
            raise SystemExit(f"backends disagree on {name}")
        times = {b: min(timeit.repeat(lambda b=b: fn(b), number=1, repeat=args.repeat)) for b in backends}
        row = f"{name:38s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
