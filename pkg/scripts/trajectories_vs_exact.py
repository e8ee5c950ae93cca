#!/usr/bin/env python3
"""Compare Monte Carlo occupation estimates with direct evolution.

Writes plot-ready CSV (step, site, exact, mc_mean, mc_stderr, sigmas) to
stdout for the diagonal-coin line walk.
"""

import argparse
import sys

import numpy as np

from qmcspectra import models, site_prob
from qmcspectra.trajectories import TrajectoryConfig, estimate_site_prob


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--trajectories", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    m = models.diagonal_coin_line_walk()
    rho = np.array([[0.7, 0.1], [0.1, 0.3]])
    cfg = TrajectoryConfig(m, 0, rho, args.steps, args.trajectories, args.seed)
    est = estimate_site_prob(cfg)

    out = sys.stdout
    out.write("step,site,exact,mc_mean,mc_stderr,sigmas\n")
    for step in range(args.steps + 1):
        for site in est.sites():
            exact = site_prob(m, 0, site, rho, step)
            mean = est.mean(step, site)
            if exact < 1e-12 and mean == 0.0:
                continue
            se = max(est.stderr(step, site), 1e-12)
            out.write(
                f"{step},{site},{exact:.8f},{mean:.8f},{se:.8f},"
                f"{(mean - exact) / se:+.2f}\n"
            )


if __name__ == "__main__":
    main()
