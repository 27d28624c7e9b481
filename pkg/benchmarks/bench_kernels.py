"""Time the compiled simulation kernels against the pure-numpy reference.

Two regimes matter in practice: one long recursion (a single scenario
simulation) and a pile of short ones (identification and certification
loops calling simulate over and over). Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --long-steps 2000000 --repeats 5
"""

import argparse
import time

import numpy as np

from dissipacert._kernels import _ref

try:
    from dissipacert._kernels import _core
except ImportError:
    _core = None


def _stable_system(rng, n, radius=0.9):
    a = rng.normal(size=(n, n))
    return a * (radius / max(np.abs(np.linalg.eigvals(a)).max(), 1e-12))


def _best_of(repeats, fn):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def build_cases(args):
    rng = np.random.default_rng(args.seed)

    n_long = args.long_order
    a_long = _stable_system(rng, n_long)
    w_long = rng.normal(size=(n_long, args.long_steps))
    x0_long = rng.normal(size=n_long)

    n_short = args.short_order
    a_short = _stable_system(rng, n_short)
    w_short = rng.normal(size=(n_short, args.short_steps))
    x0_short = rng.normal(size=n_short)

    w_const = rng.normal(size=n_long)

    def long_run(impl):
        impl.affine_recursion(a_long, w_long, x0_long)

    def short_runs(impl):
        for _ in range(args.short_count):
            impl.affine_recursion(a_short, w_short, x0_short)

    def const_run(impl):
        impl.affine_recursion_const(a_long, w_const, x0_long, args.long_steps)

    return [
        (
            f"1 run x {args.long_steps} steps (n={n_long})",
            args.long_steps,
            long_run,
        ),
        (
            f"{args.short_count} runs x {args.short_steps} steps (n={n_short})",
            args.short_count * args.short_steps,
            short_runs,
        ),
        (
            f"constant drive, {args.long_steps} steps (n={n_long})",
            args.long_steps,
            const_run,
        ),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--long-steps", type=int, default=500_000)
    parser.add_argument("--long-order", type=int, default=8)
    parser.add_argument("--short-steps", type=int, default=200)
    parser.add_argument("--short-count", type=int, default=2_000)
    parser.add_argument("--short-order", type=int, default=6)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = [("python", _ref)]
    if _core is not None:
        backends.append(("compiled", _core))
    else:
        print("note: compiled extension not built, timing the fallback only")

    width = 44
    header = f"{'case':<{width}} {'backend':<9} {'best':>9} {'steps/s':>12}"
    print(header)
    print("-" * len(header))
    for label, total_steps, runner in build_cases(args):
        timings = {}
        for name, impl in backends:
            timings[name] = _best_of(args.repeats, lambda: runner(impl))
        for name in timings:
            rate = total_steps / timings[name]
            print(
                f"{label:<{width}} {name:<9} {timings[name]:>8.3f}s "
                f"{rate:>11.2e}"
            )
        if len(timings) == 2:
            speedup = timings["python"] / timings["compiled"]
            print(f"{'':<{width}} speedup  {speedup:>9.1f}x")
        print()


if __name__ == "__main__":
    main()
