"""Compare the compiled and NumPy RK4 backends on the same workload.

    python benchmarks/bench_integrator.py [--batch 64] [--periods 50] [--repeat 3]

Prints wall time per backend, the speed-up and the largest state difference
between the two (they implement the same arithmetic, so it should sit at
rounding level).
"""
import argparse
import time

import numpy as np

from resonance_lab.kernels import available_backends, run_rk4
from resonance_lab.model import build_duffing, build_two_dof
from resonance_lab.oracle import model_arrays


def run(model, backend, batch, periods, steps_per_period, omega=1.2, f=0.5):
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, (batch, model.n))
    v = rng.uniform(-2, 2, (batch, model.n))
    dt = 2 * np.pi / omega / steps_per_period
    n_steps = periods * steps_per_period
    t = time.perf_counter()
    run_rk4(model_arrays(model, f), x, v, 0.0, dt, n_steps, steps_per_period, omega,
            backend=backend)
    return time.perf_counter() - t, x


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--periods", type=int, default=50)
    p.add_argument("--steps", type=int, default=200, help="steps per period")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    for model in (build_duffing(), build_two_dof()):
        times, finals = {}, {}
        for b in backends:
            best = np.inf
            for _ in range(args.repeat):
                dt, x = run(model, b, args.batch, args.periods, args.steps)
                best = min(best, dt)
            times[b], finals[b] = best, x
        steps = args.batch * args.periods * args.steps
        line = ", ".join(f"{b} {times[b]:.3f} s ({steps / times[b] / 1e6:.2f} Msteps/s)"
                         for b in backends)
        print(f"{model.name:8s} {line}")
        if len(backends) == 2:
            diff = np.max(np.abs(finals["cython"] - finals["python"]))
            print(f"{'':8s} speed-up {times['python'] / times['cython']:.1f}x, "
                  f"max |dx| {diff:.2e}")


if __name__ == "__main__":
    main()
