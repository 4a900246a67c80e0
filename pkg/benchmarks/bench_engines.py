#!/usr/bin/env python3
"""Throughput comparison between the compiled round kernel and the
pure-Python fallback.

Both engines are driven with identical arguments and must produce
bit-identical arrays; the script asserts that before it reports any
numbers, so a speedup claim can never hide a divergence.

Usage: python3 benchmarks/bench_engines.py [--rounds N] [--attack-rounds N]
"""

import argparse
import sys
import time

import numpy as np

from msqkd import _engine_py
from msqkd.protocol import AttackModel


def _buffers(n):
    return [np.zeros(n, dtype=np.int8) for _ in range(5)]


def _run_honest(mod, rounds, seed=7):
    arrs = _buffers(rounds)
    mod.run_rounds_honest(seed, 0, rounds, 0.5, 0.1, 0.1, *arrs)
    return arrs


def _run_attack(mod, attack, rounds, seed=7):
    er = np.ascontiguousarray(attack.eve_vectors.real)
    ei = np.ascontiguousarray(attack.eve_vectors.imag)
    arrs = _buffers(rounds)
    mod.run_rounds_attack(seed, 0, rounds, 0.5, attack.alphas, er, ei, *arrs)
    return arrs


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--rounds", type=int, default=200_000,
                        help="honest-channel rounds per timing run (default 200000)")
    parser.add_argument("--attack-rounds", type=int, default=50_000,
                        help="attack-channel rounds per timing run (default 50000)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repetitions, best one reported (default 3)")
    args = parser.parse_args(argv)

    try:
        from msqkd import _kernel
    except ImportError:
        print("compiled kernel is not built; nothing to compare", file=sys.stderr)
        return 1

    attack = AttackModel.random(4, np.random.default_rng(3))

    workloads = [
        ("honest", args.rounds,
         lambda mod: _run_honest(mod, args.rounds)),
        ("attack d=4", args.attack_rounds,
         lambda mod: _run_attack(mod, attack, args.attack_rounds)),
    ]

    print(f"{'workload':<12} {'rounds':>8} {'cython':>12} {'python':>12} {'speedup':>8}")
    for name, rounds, runner in workloads:
        fast = runner(_kernel)
        slow = runner(_engine_py)
        for a, b in zip(fast, slow):
            assert np.array_equal(a, b), f"{name}: engines disagree"

        t_fast = _best_of(lambda: runner(_kernel), args.repeats)
        t_slow = _best_of(lambda: runner(_engine_py), args.repeats)
        print(f"{name:<12} {rounds:>8} {rounds / t_fast:>10.0f}/s "
              f"{rounds / t_slow:>10.0f}/s {t_slow / t_fast:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
