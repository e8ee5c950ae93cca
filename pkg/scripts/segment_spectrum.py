#!/usr/bin/env python3
"""Print the spectral table of a uniform-hopping segment chain.

For each eigenvalue node of the assembled block matrix the script lists
the multiplicity, the trace of the matrix weight, and the residual of the
moment identity against direct powers.
"""

import argparse

import numpy as np

from qmcspectra import models, truncate
from qmcspectra.spectral import finite_spectrum_weights


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sites", type=int, default=5)
    ap.add_argument("--s", type=float, default=0.5, help="hold weight")
    ap.add_argument("--a", type=float, default=0.5)
    ap.add_argument("--b", type=float, default=0.5)
    ap.add_argument("--r", type=float, default=0.5, help="down hop")
    ap.add_argument("--t", type=float, default=0.5, help="up hop")
    args = ap.parse_args()

    m = models.uniform_hopping_segment(args.sites, args.s, args.a, args.b, args.r, args.t)
    w = finite_spectrum_weights(m)
    mat = truncate(m, 0, args.sites - 1).matrix

    print(f"# {args.sites}-site chain, s={args.s} a={args.a} b={args.b} r={args.r} t={args.t}")
    print(f"{'node':>12} {'mult':>5} {'tr(W)':>10} {'|W-W*|':>10}")
    for p in w.points:
        herm = np.abs(p.weight - p.weight.conj().T).max()
        print(f"{p.node.real:12.8f} {p.multiplicity:5d} "
              f"{np.trace(p.weight).real:10.6f} {herm:10.2e}")

    worst = 0.0
    power = np.eye(mat.shape[0], dtype=complex)
    for n in range(7):
        worst = max(worst, np.abs(w.moment(n) - power[:4, :4]).max())
        power = mat @ power
    print(f"# moment identity residual (n <= 6): {worst:.3e}")


if __name__ == "__main__":
    main()
