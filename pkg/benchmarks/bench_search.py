"""Compare the compiled and pure-Python distance-scan backends.

Builds synthetic unit-norm corpora at several sizes and times full
top-10 searches through the public index API with each backend forced
in turn, then prints a table of per-query latency and speedup.

Usage: python3 benchmarks/bench_search.py [--dim 384] [--queries 200]
"""

import argparse
import statistics
import time

import numpy as np

from hdlrag import _kernels
from hdlrag.index import build_index, search

SIZES = (100, 1_000, 10_000)


def make_corpus(rng, n, dim):
    vectors = rng.normal(size=(n, dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return build_index([(f"d{i}", vectors[i]) for i in range(n)])


def time_backend(index, queries, backend, repeats=3):
    saved = _kernels.BACKEND
    _kernels.BACKEND = backend
    try:
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            for q in queries:
                search(index, q, 10)
            best = min(best, (time.perf_counter() - start) / len(queries))
        return best
    finally:
        _kernels.BACKEND = saved


def check_agreement(index, queries):
    """Backends must rank identically and agree on distances to rounding."""
    worst = 0.0
    for q in queries[:20]:
        results = {}
        for backend in _kernels.available_backends():
            saved = _kernels.BACKEND
            _kernels.BACKEND = backend
            try:
                results[backend] = search(index, q, 10)
            finally:
                _kernels.BACKEND = saved
        baseline = results["python"]
        for backend, hits in results.items():
            assert [h.doc_id for h in hits] == [h.doc_id for h in baseline], backend
            worst = max(
                worst,
                max(
                    abs(a.distance - b.distance) / max(b.distance, 1e-300)
                    for a, b in zip(hits, baseline)
                ),
            )
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=384)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    print(f"backends available: {backends} (active default: {_kernels.BACKEND})")
    if "compiled" not in backends:
        print("compiled extension not built; timing python backend only")

    rng = np.random.default_rng(args.seed)
    queries = rng.normal(size=(args.queries, args.dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)

    header = f"{'vectors':>8} | " + " | ".join(f"{b + ' us/query':>18}" for b in backends)
    if len(backends) == 2:
        header += f" | {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in SIZES:
        index = make_corpus(rng, n, args.dim)
        worst = check_agreement(index, queries)
        times = {b: time_backend(index, queries, b) for b in backends}
        row = f"{n:>8} | " + " | ".join(f"{times[b] * 1e6:>18.1f}" for b in backends)
        if len(backends) == 2:
            row += f" | {times['python'] / times['compiled']:>7.2f}x"
        print(row)
        if worst > 1e-12:
            print(f"  note: worst relative distance disagreement {worst:.2e}")
    print("(lower is better; best of 3 repeats; agreement checked per size)")


if __name__ == "__main__":
    main()
