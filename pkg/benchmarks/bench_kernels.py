#!/usr/bin/env python3
"""Benchmark the compiled cost kernel against the numpy fallback.

Measures raw cost evaluations per second and full annealing-chain
throughput for both backends at a configurable width, and checks that the
two backends agree on the cost values they produce.

Usage:
    python benchmarks/bench_kernels.py [--n 1024] [--iterations 30000]
"""

import argparse
import time

import numpy as np

from headanneal.annealing import AnnealConfig, SurrogatePairCost, anneal
from headanneal.kernels import HAVE_COMPILED, make_pair_kernel
from headanneal.masks import WeightBounds
from headanneal.surrogate import SurrogateRegressor


def random_regressor(sizes, seed):
    rng = np.random.default_rng(seed)
    weights = [
        rng.standard_normal((sizes[i], sizes[i + 1])) * np.sqrt(2.0 / sizes[i]) * 0.2
        for i in range(3)
    ]
    biases = [np.zeros(sizes[i + 1]) for i in range(3)]
    biases[2][0] = 0.5
    return SurrogateRegressor(sizes, weights, biases)


def bench_kernel(kernel, n, calls, seed=0):
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=max(1, n // 8), replace=False)).astype(np.int64)
    kernel.cost_of_indices(idx)  # warm up
    start = time.perf_counter()
    for _ in range(calls):
        kernel.cost_of_indices(idx)
    return calls / (time.perf_counter() - start)


def bench_chain(theta_bias, theta_ppl, backend, n, iterations):
    config = AnnealConfig(
        epsilon=0.5,
        bounds=WeightBounds(2, max(3, n // 5)),
        iterations=iterations,
        t0=1.0,
        seed=0,
        record_trace=False,
        backend=backend,
    )
    pair = SurrogatePairCost(theta_bias, theta_ppl, 0.5, backend=backend)
    result = anneal(pair, config)
    return result.states_per_second, result.best_cost


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=1024, help="head count / input width")
    parser.add_argument("--iterations", type=int, default=30_000)
    parser.add_argument("--kernel-calls", type=int, default=8000)
    args = parser.parse_args()

    sizes = [args.n, 256, 128, 1] if args.n >= 256 else [args.n, 64, 32, 1]
    theta_bias = random_regressor(sizes, 1)
    theta_ppl = random_regressor(sizes, 2)
    nets = (theta_bias.as_net_arrays(), theta_ppl.as_net_arrays())

    backends = ["numpy"] + (["compiled"] if HAVE_COMPILED else [])
    if not HAVE_COMPILED:
        print("note: compiled extension not built; benchmarking fallback only\n")

    print(f"surrogate pair {sizes}, chain of {args.iterations} iterations\n")
    print(f"{'backend':<10} {'kernel cost/s':>14} {'chain states/s':>15} {'best cost':>11}")
    rates = {}
    costs = {}
    for backend in backends:
        kernel = make_pair_kernel(*nets, 0.5, backend=backend)
        kernel_rate = bench_kernel(kernel, args.n, args.kernel_calls)
        chain_rate, best = bench_chain(theta_bias, theta_ppl, backend, args.n, args.iterations)
        rates[backend] = chain_rate
        costs[backend] = best
        print(f"{backend:<10} {kernel_rate:>14,.0f} {chain_rate:>15,.0f} {best:>11.6f}")

    if len(backends) == 2:
        print(f"\ncompiled speedup over numpy: {rates['compiled'] / rates['numpy']:.2f}x")
        # same seed, same proposal stream; costs may differ only in the last ulps
        diff = abs(costs["compiled"] - costs["numpy"])
        print(f"best-cost agreement: |diff| = {diff:.3e}")


if __name__ == "__main__":
    main()
