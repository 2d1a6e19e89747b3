"""Time the numba and numpy kernel paths on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Compilation is excluded: each numba kernel is called once before timing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from adaptive_sensing import _kernels
from adaptive_sensing.learn import toy_mdp_fixture


def workloads(rng):
    x = rng.uniform(0, 2, 16)
    noise = rng.normal(0, 0.05, 16)
    mdp = toy_mdp_fixture()
    cdf = np.cumsum(mdp.transitions, axis=2)
    cdf[..., -1] = 1.0
    draws = rng.random((500, 100, 3))
    S = 50
    P = rng.random((S, 4, S))
    P /= P.sum(axis=2, keepdims=True)
    R, V, term = rng.normal(size=S), np.zeros(S), np.zeros(S, dtype=bool)
    W, b = rng.normal(size=(4, 16)), rng.normal(size=4)
    X, y = rng.normal(size=(256, 16)), rng.integers(0, 4, 256).astype(np.int64)
    return {
        "capture (16 px)": lambda k: k.capture(x, 2.0, 0.0, noise, 3),
        "bellman_sweep (50x4)": lambda k: k.bellman_sweep(P, R, term, 0.9, V),
        "q_learning_mdp (500 ep)": lambda k: k.q_learning_mdp(
            cdf, mdp.rewards, mdp.terminal, 0, 0.9, 0.1, np.zeros((3, 2)),
            np.zeros((3, 2), dtype=np.int64), draws, 0.1, True),
        "logistic_grad (256x16)": lambda k: k.logistic_grad(W, b, X, y),
    }


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args(argv)
    impls = {"numpy": _kernels.numpy_impl}
    if _kernels.HAVE_NUMBA:
        impls["numba"] = _kernels.numba_impl
    else:
        print("numba not installed; timing the numpy path only")
    print(f"{'kernel':<26}" + "".join(f"{name:>14}" for name in impls) + "   speedup")
    for label, call in workloads(np.random.default_rng(0)).items():
        times = {}
        for name, impl in impls.items():
            call(impl)  # warm-up / JIT compile
            n = max(1, args.repeat // 20) if "q_learning" in label else args.repeat
            times[name] = min(timeit.repeat(lambda: call(impl), number=n, repeat=3)) / n
        row = f"{label:<26}" + "".join(f"{1e6 * t:>11.1f} us" for t in times.values())
        if "numba" in times:
            row += f"   {times['numpy'] / times['numba']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
