"""Compare the compiled and pure-Python closed-loop kernels.

    python benchmarks/bench_rhs.py [--repeat N] [--steps N]
"""
import argparse
import timeit

import numpy as np

from discwalker import Gains, RobotParams, design_gait
from discwalker.kernels import BACKEND, make_kernel
from discwalker.sim import ControlContext, SimConfig, walk


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20000, help="RHS calls per timing")
    ap.add_argument("--steps", type=int, default=10, help="steps in the full-walk timing")
    args = ap.parse_args()

    p = RobotParams()
    g = design_gait(p)
    gains = Gains()
    x = np.array([0.1, -0.3, -0.1, 0.5, 1.2, 0.9])
    backends = ["python"] + (["cython"] if BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled kernels not available; timing the Python kernel only")

    rhs_us, walk_s = {}, {}
    for name in backends:
        k = make_kernel(p, p, g, gains, backend=name)
        n = args.repeat if name == "cython" else max(args.repeat // 20, 100)
        rhs_us[name] = min(timeit.repeat(lambda: k.rhs(0.0, x), number=n, repeat=5)) / n * 1e6
        ctx = ControlContext(p, g, gains, backend=name)
        cfg = SimConfig(steps=args.steps, sample_dt=0.01)
        walk_s[name] = min(timeit.repeat(lambda: walk(p, ctx, cfg), number=1, repeat=3))

    print(f"{'backend':8s} {'rhs [us]':>10s} {'walk [s]':>10s}")
    for name in backends:
        print(f"{name:8s} {rhs_us[name]:10.2f} {walk_s[name]:10.3f}")
    if len(backends) == 2:
        print(f"speedup  {rhs_us['python'] / rhs_us['cython']:10.1f} {walk_s['python'] / walk_s['cython']:10.1f}")


if __name__ == "__main__":
    main()
