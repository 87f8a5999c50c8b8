"""Diagonal anti-maximum-principle scan above the negative principal eigenvalue."""

import argparse

import numpy as np

from lespectra.dirichlet import amp_scan
from lespectra.eigen import ExponentPair
from lespectra.geometry import Field, make_uniform_grid
from lespectra.operators import fucik_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kappa", type=float, default=4.0)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=199)
    ap.add_argument("--csv", default=None, help="write the scan table here")
    args = ap.parse_args()
    g = make_uniform_grid((0.0, 1.0), args.n)
    one = Field.constant(g, 1.0)
    f = Field(g, np.where(g.boundary_mask, 0.0, -1.0))
    F1, F2 = fucik_pair(args.kappa)
    rep = amp_scan(F1, F2, one, one, ExponentPair(args.p, 1 / args.p), f, f)
    print(f"lambda1+ = {rep.parameters['lambda1_plus']:.5f}  lambda1- = {rep.parameters['lambda1_minus']:.5f}")
    print(f"negative on (lambda1-, lambda1- + {rep.verdict:.4f}); first failure at {rep.parameters['first_failure']}")
    print(f"{'lambda':>12} {'offset':>10} {'conv':>5} {'neg':>5} {'max u':>12} {'max v':>12}")
    for lam, off, conv, neg, mu, mv in rep.table:
        print(f"{lam:>12.5f} {off:>10.2e} {conv!s:>5} {neg!s:>5} {mu:>12.3e} {mv:>12.3e}")
    if args.csv:
        rep.write_csv(args.csv)


if __name__ == "__main__":
    main()
