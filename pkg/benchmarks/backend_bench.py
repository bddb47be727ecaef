#!/usr/bin/env python3
"""Compare the numba-jitted CSR kernels against the pure-numpy fallback.

Runs the library's hot paths (sparse products, dense propagation, kernel
construction) on SBM graphs of growing size under both backends, checks
that the outputs are bit-identical, and reports best-of-k wall times.

Usage:
    python3 benchmarks/backend_bench.py [--sizes 100 300 1000] [--repeats 5]

The same comparison can be forced process-wide with
DIFFGRAPH_BACKEND={numba,numpy}; this script switches in-process instead.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from diffgraph.backend import use_backend
from diffgraph.data import generate_sbm
from diffgraph.diffusion import DiffusionConfig, build_kernel, enhanced_adjacency
from diffgraph.errors import ConfigError
from diffgraph.graphs import transition_matrix


def build_workloads(n: int, degree: int, seed: int):
    # edge probabilities scaled so the expected degree stays near `degree`
    # as n grows; otherwise large graphs densify and the comparison drifts
    p_in = min(1.0, 1.5 * degree / n)
    p_out = min(1.0, 0.5 * degree / n)
    graph = generate_sbm(n, 4, p_in, p_out, 16, seed)
    p = transition_matrix(graph)
    x = np.random.default_rng(seed).standard_normal((n, 64))
    ppr = DiffusionConfig(kind="ppr", alpha=0.85, order=8)
    heat = DiffusionConfig(kind="heat", time=1.0, order=6)
    kernel = build_kernel(graph, ppr)
    return p.nnz, {
        "spgemm P@P": lambda: p.matmul(p).to_dense(),
        "spmm P@X": lambda: p.dense_matmul(x),
        "transpose": lambda: p.transpose().to_dense(),
        "ppr order 8": lambda: build_kernel(graph, ppr).matrix.to_dense(),
        "heat t=1.0": lambda: build_kernel(graph, heat).matrix.to_dense(),
        "K A K^T": lambda: enhanced_adjacency(kernel, graph.adjacency).matrix.to_dense(),
    }


def best_of(fn, repeats: int):
    best = float("inf")
    out = None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return out, best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    # the numpy fallback is minutes-slow on the heat path past n~500;
    # pass larger --sizes explicitly when that cost is acceptable
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 300])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--degree", type=int, default=12)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    try:
        use_backend("numba")
    except ConfigError as exc:
        print(f"cannot benchmark: {exc}")
        return 1
    # first calls JIT-compile; run everything once so timing excludes that
    _, warm = build_workloads(min(args.sizes), args.degree, args.seed)
    for fn in warm.values():
        fn()

    header = f"{'workload':<14} {'numpy':>10} {'numba':>10} {'speedup':>8}  identical"
    for n in sorted(args.sizes):
        nnz, workloads = build_workloads(n, args.degree, args.seed)
        print(f"\nn={n} nnz={nnz}")
        print(header)
        for name, fn in workloads.items():
            use_backend("numpy")
            ref, t_np = best_of(fn, args.repeats)
            use_backend("numba")
            out, t_nb = best_of(fn, args.repeats)
            same = "yes" if np.array_equal(ref, out) else "NO"
            print(
                f"{name:<14} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms"
                f" {t_np / t_nb:>7.1f}x  {same}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
