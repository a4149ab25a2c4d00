#!/usr/bin/env python3
"""Refinement study of the normalized filtering-equation residual.

For each (step size, cloud size) rung the script simulates fresh
realizations of the chosen family, runs the particle filter, assembles the
discrete residual of the normalized filtering equation for a test function,
and reports the median root-mean-square residual over the replicas.  The
medians should decrease down the ladder.

Usage: python3 scripts/refinement_ladder.py [--family mixed] [--function coord:0]
"""

import argparse
import time

import numpy as np

from levyfilter import (build_family, derive_seed, ks_residual,
                        project_observation, simulate_path, zakai_filter)
from levyfilter.simulate import TimeGrid
from levyfilter.testfuncs import make_test_function

LADDER = [(1e-2, 1000), (5e-3, 4000), (2.5e-3, 16000)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="mixed")
    ap.add_argument("--function", default="coord:0")
    ap.add_argument("--replicas", type=int, default=10)
    ap.add_argument("--seed", type=int, default=515)
    args = ap.parse_args()

    scen = build_family(args.family)
    spec = scen.spec
    F = make_test_function(args.function, spec.n)
    medians = []
    for dt, n_particles in LADDER:
        n_steps = int(round(spec.T / dt))
        rms = []
        t0 = time.time()
        for r in range(args.replicas):
            seed = derive_seed(args.seed, "ladder", n_steps, r)
            grid = TimeGrid(0.0, spec.T, n_steps)
            rec = simulate_path(spec, grid, scen.prior_sampler, scen.y0, seed)
            traj = zakai_filter(spec, project_observation(rec), n_particles,
                                scen.prior_sampler, derive_seed(seed, "filter"),
                                test_functions=(F,))
            res = ks_residual(traj, F.name)
            rms.append(float(np.sqrt(np.mean(res ** 2))))
        med = float(np.median(rms))
        medians.append(med)
        print(f"dt={dt:<8g} N={n_particles:<6d} median RMS={med:.6f}  "
              f"range=[{min(rms):.6f}, {max(rms):.6f}]  "
              f"({time.time() - t0:.1f}s)")
    dec = all(a > b for a, b in zip(medians, medians[1:]))
    print(f"\nmonotone decrease down the ladder: {dec}")


if __name__ == "__main__":
    main()
