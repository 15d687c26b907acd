"""Compare the compiled and pure-Python bandit kernels.

    python3 benchmarks/bench_kernel.py --repeat 5 --calls 20000
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from dealbench import _kernels
from dealbench.bandit import Schedule, SeparableEnv, train


def _time(fn, calls: int, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        best = min(best, time.perf_counter() - t0)
    return best / calls * 1e6


def bench_impl(impl, calls: int, repeat: int, k: int) -> dict:
    rng = np.random.default_rng(0)
    theta = rng.normal(size=96)
    active = np.sort(rng.choice(96, size=k, replace=False)).astype(np.int64)
    arm = int(active[0])
    return {
        "softmax_us": _time(lambda: impl.softmax(theta, active), calls, repeat),
        "choose_us": _time(lambda: impl.choose(theta, active, 0.05, 0.5, 0.3), calls, repeat),
        "update_us": _time(lambda: impl.update(theta.copy(), active, arm, -1.0, -0.5, 0.1), calls, repeat),
    }


def bench_training(impl, steps: int) -> float:
    saved = (_kernels.softmax, _kernels.choose, _kernels.update)
    _kernels.softmax, _kernels.choose, _kernels.update = impl.softmax, impl.choose, impl.update
    try:
        t0 = time.perf_counter()
        train(SeparableEnv(17), Schedule(total_steps=steps), rng_seed=0)
        return time.perf_counter() - t0
    finally:
        _kernels.softmax, _kernels.choose, _kernels.update = saved


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--calls", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--active", type=int, default=24, help="active-set size")
    ap.add_argument("--steps", type=int, default=500, help="main-phase steps for the training run")
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    impls = {"python": _kernels.python_impl}
    if _kernels.compiled_impl is not None:
        impls["cython"] = _kernels.compiled_impl
    results = {}
    for name, impl in impls.items():
        row = bench_impl(impl, args.calls, args.repeat, args.active)
        row["train_s"] = bench_training(impl, args.steps)
        results[name] = row

    if args.json:
        print(json.dumps(results, indent=2))
        return 0
    cols = ["softmax_us", "choose_us", "update_us", "train_s"]
    print(f"{'backend':<8} " + " ".join(f"{c:>11}" for c in cols))
    for name, row in results.items():
        print(f"{name:<8} " + " ".join(f"{row[c]:>11.3f}" for c in cols))
    if "cython" in results:
        speed = {c: results["python"][c] / results["cython"][c] for c in cols}
        print(f"{'speedup':<8} " + " ".join(f"{speed[c]:>10.1f}x" for c in cols))
    else:
        print("compiled kernel not built; only the fallback was measured")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
