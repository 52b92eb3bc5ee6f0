"""Wall-clock comparison of the compiled and pure-Python march kernels.

Usage::

    python benchmarks/bench_march.py [--n 20,80,140] [--steps 5000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from viscobeam import BeamConfig, build_mixed
from viscobeam._kernels import BACKEND
from viscobeam.stepper import solve_quasi_static


def best_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="20,80,140", help="comma-separated element counts")
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--element", type=int, default=1, choices=[1, 2])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if BACKEND != "cython":
        raise SystemExit("compiled kernel not available; build it with `pip install -e . --no-build-isolation`")

    dt = 2e-3
    cfg = BeamConfig(T=args.steps * dt, dt=dt)
    print(f"{'n':>5} {'dofs':>6} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max diff':>9}")
    for n in (int(x) for x in args.n.split(",")):
        ops = build_mixed(cfg, n, args.element)
        runs = {}
        t = {}
        for be in ("python", "cython"):
            t[be] = best_time(lambda: runs.__setitem__(be, solve_quasi_static(ops, cfg=cfg, backend=be)), args.repeat)
        diff = float(np.abs(runs["python"].states - runs["cython"].states).max())
        print(f"{n:>5} {ops.n:>6} {t['python']:>11.3f} {t['cython']:>11.3f} "
              f"{t['python'] / t['cython']:>7.1f}x {diff:>9.1e}")


if __name__ == "__main__":
    main()
