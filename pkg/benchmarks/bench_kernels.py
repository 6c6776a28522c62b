"""Compare the compiled and numpy measurement kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per backend and the speedup; both backends must
agree on the results to 1e-12.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from polariton_transfer.core import build_chain
from polariton_transfer.dynamics import spectral_decompose
from polariton_transfer.kernels import get_backend

CASES = [
    # (label, N, rounds or profile steps)
    ("measure N=20 x 4096 rounds", 20, 4096),
    ("measure N=64 x 4096 rounds", 64, 4096),
    ("profile N=64 x 6300 steps", 64, 6300),
]


def _setup(n):
    graph = build_chain(n)
    dec = spectral_decompose(graph)
    V = np.ascontiguousarray(dec.eigenvectors)
    w = np.ascontiguousarray(dec.eigenvalues)
    c = V[graph.s, :].astype(np.complex128)
    return graph, V, w, c


def _run(backend, label, n, m):
    measure, profile = get_backend(backend)
    graph, V, w, c = _setup(n)
    if label.startswith("measure"):
        dts = np.full(m, 0.35 * n ** (1 / 3))
        out = measure(V, w, c, graph.r, dts, 2.0, 0.0)
        return np.asarray(out[2])  # cumulative
    return np.asarray(profile(np.ascontiguousarray(V[graph.r, :]), c, w, 0.01, m))


def bench(repeat: int):
    backends = ["python"]
    try:
        get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")
    for label, n, m in CASES:
        best, results = {}, {}
        for b in backends:
            times = []
            for _ in range(repeat):
                t0 = time.perf_counter()
                results[b] = _run(b, label, n, m)
                times.append(time.perf_counter() - t0)
            best[b] = min(times)
        line = f"{label:30s} " + "  ".join(f"{b}={best[b] * 1e3:8.2f} ms" for b in backends)
        if len(backends) == 2:
            diff = float(np.max(np.abs(results["python"] - results["cython"])))
            line += f"  speedup={best['python'] / best['cython']:.1f}x  maxdiff={diff:.1e}"
            assert diff < 1e-12, "backends disagree"
        print(line)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    bench(ap.parse_args().repeat)
