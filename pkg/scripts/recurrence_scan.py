#!/usr/bin/env python3
"""Scan the hopping balance of the uniform line chain and classify site 0.

The chain is recurrent exactly on the balanced diagonal t = r; off the
diagonal the scan prints the finite value of the return series.
"""

import argparse

import numpy as np

from qmcspectra import models
from qmcspectra.folding import classify_recurrence_on_line


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, default=0.4, help="hold weight")
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    rho = np.eye(2) / 2
    budget = 1.0 - args.s
    print(f"{'r':>8} {'t':>8} {'verdict':>12} {'limit':>12}")
    for k in range(1, args.points + 1):
        r = budget * k / (args.points + 1)
        t = budget - r
        m = models.uniform_hopping_line(args.s, 0.5, 0.5, r, t)
        cls = classify_recurrence_on_line(m, 0, rho)
        limit = f"{cls.limit:.6f}" if cls.limit is not None else "-"
        print(f"{r:8.4f} {t:8.4f} {cls.verdict:>12} {limit:>12}")


if __name__ == "__main__":
    main()
