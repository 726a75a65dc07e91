"""Sphere benchmark for the swarm optimizer in the log10 hyperparameter box.

Runs many seeds at the default swarm settings and, for contrast, with the
constriction-style settings (w = 0.729, c1 = c2 = 1.494) that are known to
converge. Prints the success rate at a fitness threshold and fitness quantiles.
"""
import argparse
import time

import numpy as np

from heatload.pso import PsoConfig, optimize


def sphere(target):
    def f(x):
        d = np.log10(x) - target
        return float(d @ d)
    return f


def run(label, cfg_kw, target, seeds, threshold):
    f = sphere(target)
    t0 = time.perf_counter()
    fits = np.array([optimize(f, PsoConfig(rng_seed=s, **cfg_kw)).best_fitness for s in range(seeds)])
    dt = time.perf_counter() - t0
    q = np.quantile(fits, [0.1, 0.5, 0.9])
    print(f"{label:14s} hits {np.sum(fits <= threshold):3d}/{seeds}  "
          f"q10 {q[0]:.2e}  median {q[1]:.2e}  q90 {q[2]:.2e}  {dt / seeds * 1e3:.1f} ms/run")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--threshold", type=float, default=1e-3)
    ap.add_argument("--target", type=float, nargs=3, default=[1.0, -0.301, -4.0],
                    help="optimum in log10 coordinates")
    args = ap.parse_args()
    target = np.array(args.target)
    run("default", {}, target, args.seeds, args.threshold)
    run("constriction", {"inertia": 0.729, "c1": 1.494, "c2": 1.494}, target, args.seeds, args.threshold)
    run("w=0.9", {"inertia": 0.9}, target, args.seeds, args.threshold)
    run("200 iters", {"n_iterations": 200}, target, args.seeds, args.threshold)


if __name__ == "__main__":
    main()
