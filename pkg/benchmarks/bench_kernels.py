"""Compare the compiled message-passing kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--nodes N] [--edges E] [--dim H]
"""

import argparse
import time

import numpy as np

from topicrefine.gnn import kernels


def make_case(rng, n_nodes, n_edges, hidden):
    W = rng.normal(size=(n_edges, hidden, hidden))
    h_prev = rng.normal(size=(n_nodes, hidden))
    src = rng.integers(0, n_nodes, size=n_edges)
    dst = rng.integers(0, n_nodes, size=n_edges)
    deg = np.bincount(dst, minlength=n_nodes).astype(np.float64)
    inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    g_agg = rng.normal(size=(n_nodes, hidden))
    return W, h_prev, src, dst, inv_deg, g_agg


def bench(fn, args, repeats):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=2000)
    parser.add_argument("--edges", type=int, default=20000)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=10)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    W, h_prev, src, dst, inv_deg, g_agg = make_case(
        rng, args.nodes, args.edges, args.dim)

    pairs = [
        ("forward", kernels.aggregate_forward,
         kernels.numpy_aggregate_forward, (W, h_prev, src, dst, inv_deg)),
        ("backward", kernels.aggregate_backward,
         kernels.numpy_aggregate_backward,
         (W, h_prev, src, dst, inv_deg, g_agg)),
    ]

    print(f"active backend: {kernels.BACKEND}")
    print(f"nodes={args.nodes} edges={args.edges} hidden={args.dim} "
          f"repeats={args.repeats}")
    for name, active, fallback, call_args in pairs:
        got = active(*call_args)
        want = fallback(*call_args)
        if isinstance(got, tuple):
            ok = all(np.allclose(g, w, atol=1e-10)
                     for g, w in zip(got, want))
        else:
            ok = np.allclose(got, want, atol=1e-10)
        t_active = bench(active, call_args, args.repeats)
        t_fallback = bench(fallback, call_args, args.repeats)
        speedup = t_fallback / t_active if t_active > 0 else float("inf")
        print(f"{name:9s} active={t_active * 1e3:8.2f} ms  "
              f"numpy={t_fallback * 1e3:8.2f} ms  "
              f"speedup={speedup:5.2f}x  agree={ok}")


if __name__ == "__main__":
    main()
