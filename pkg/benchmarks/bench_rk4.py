"""Compare the compiled and pure-Python RK4 backends.

    python benchmarks/bench_rk4.py [--repeat N]

Times a single 1 s baseline run per model and the full four-impedance
suite, then checks that both backends produce the same trajectories.
"""

import argparse
import statistics
import time

import numpy as np

from ipll_lab import kernels
from ipll_lab.dynamics import ModelKind
from ipll_lab.simulator import integrate, baseline_scenario, run_figure6_suite


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is timed")

    cases = [(f"{k.value} 1 s", lambda k=k, b=None: integrate(baseline_scenario(k), b))
             for k in ModelKind]
    cases.append(("fig6 suite 3 s x8", lambda b=None: run_figure6_suite(backend=b)))

    print(f"{'case':24s}" + "".join(f"{b:>14s}" for b in backends) + "     speedup")
    for name, fn in cases:
        best = {b: _best(lambda: fn(b=b), args.repeat)[0] for b in backends}
        row = f"{name:24s}" + "".join(f"{best[b] * 1e3:11.1f} ms" for b in backends)
        if "cython" in best:
            row += f"  {best['python'] / best['cython']:9.1f}x"
        print(row)

    if "cython" in backends:
        worst = 0.0
        for k in ModelKind:
            a = integrate(baseline_scenario(k, l_g=10.3e-3), "python")
            b = integrate(baseline_scenario(k, l_g=10.3e-3), "cython")
            worst = max(worst, float(np.max(np.abs(a.delta - b.delta))))
        print(f"max |delta_python - delta_cython| = {worst:.2e} rad")


if __name__ == "__main__":
    main()
