#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the pure numpy fallback.

Times the two hot paths on the baseline 4-4-4 tree:

* Monte Carlo trial evaluation (snapshot mode)
* the temporal failure-injection step loop

Usage:  python benchmarks/bench_kernels.py [--trials N] [--horizon N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import resilsim.kernels.pure as pure

try:
    import resilsim.kernels._core as core
except ImportError:
    core = None

from resilsim.rng import mc_block_generator, sim_stream
from resilsim.simulation import TreeIndex, ZoneParams, _postfix_program
from resilsim.topology import FatTreeConfig, build_fat_tree


def bench_mc(impl, index, op_kind, op_arg, trials: int, block: int = 8192) -> tuple[float, int]:
    failed = 0
    done = 0
    blk = 0
    started = time.perf_counter()
    while done < trials:
        size = min(block, trials - done)
        u = mc_block_generator(0, blk).random((size, index.n_instances))
        failed += impl.mc_count_failures(u, index.inst_p, op_kind, op_arg)
        done += size
        blk += 1
    return time.perf_counter() - started, failed


def bench_sim(impl, index, horizon: int, chunk: int = 4096) -> tuple[float, int]:
    zp = ZoneParams(radius=1, window=10, multiplier=2.0)
    cover_start, cover_end = index.instance_covers(zp.radius)
    stream = sim_stream(42)
    alive = np.ones(index.n_instances, dtype=np.uint8)
    fail_time = np.full(index.n_instances, -1, dtype=np.int64)
    zone_origin: list[int] = []
    zone_expiry: list[int] = []
    events = 0
    started = time.perf_counter()
    t0 = 0
    while t0 < horizon:
        steps = min(chunk, horizon - t0)
        u = stream.random((steps, index.n_instances))
        out = impl.sim_chunk(
            u, t0, index.inst_p, cover_start, cover_end,
            zp.window, zp.multiplier, 100,
            alive, fail_time, zone_origin, zone_expiry,
        )
        events += len(out[0])
        t0 += steps
    return time.perf_counter() - started, events


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=1_000_000)
    parser.add_argument("--horizon", type=int, default=200_000)
    args = parser.parse_args()

    index = TreeIndex(build_fat_tree(FatTreeConfig()))
    op_kind, op_arg = _postfix_program(index)

    backends = [("python", pure)]
    if core is not None:
        backends.insert(0, ("cython", core))
    else:
        print("note: compiled extension not built; timing the fallback only")

    print(f"baseline 4-4-4 tree: {index.n_instances} leaf instances, {index.n_units} units")
    print()
    print(f"{'kernel':<28}{'backend':<10}{'time':>10}  result")
    results: dict[tuple[str, str], float] = {}
    for name, impl in backends:
        elapsed, failed = bench_mc(impl, index, op_kind, op_arg, args.trials)
        results[("mc", name)] = elapsed
        rate = args.trials / elapsed / 1e6
        print(
            f"{'monte-carlo ' + format(args.trials, '.0e') + ' trials':<28}"
            f"{name:<10}{elapsed:>9.3f}s  {failed} failed ({rate:.1f} M trials/s)"
        )
    for name, impl in backends:
        elapsed, events = bench_sim(impl, index, args.horizon)
        results[("sim", name)] = elapsed
        rate = args.horizon / elapsed / 1e6
        print(
            f"{'simulate ' + format(args.horizon, '.0e') + ' steps':<28}"
            f"{name:<10}{elapsed:>9.3f}s  {events} events ({rate:.2f} M steps/s)"
        )
    if core is not None:
        print()
        for kernel in ("mc", "sim"):
            speedup = results[(kernel, "python")] / results[(kernel, "cython")]
            print(f"{kernel} speedup (cython vs python): {speedup:.1f}x")


if __name__ == "__main__":
    main()
