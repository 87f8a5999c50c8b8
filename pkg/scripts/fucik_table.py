"""Measured vs closed-form Fucik ratios over a range of kappa and exponent pairs."""

import argparse

from lespectra.cli import verify_fucik
from lespectra.geometry import make_uniform_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=199)
    ap.add_argument("--kappas", type=float, nargs="+", default=[1.01, 1.5, 2.0, 4.0, 9.0])
    args = ap.parse_args()
    g = make_uniform_grid((0.0, 1.0), args.n)
    print(f"{'kappa':>6} {'p':>5} {'q':>5} {'plus/sigma':>11} {'pred':>9} {'minus/sigma':>12} {'pred':>9}  ordering")
    for kappa in args.kappas:
        for p, q in ((1.0, 1.0), (2.0, 0.5), (0.5, 2.0), (3.0, 1 / 3)):
            r = verify_fucik(kappa, p, q, g)
            print(
                f"{kappa:>6.2f} {p:>5.2f} {q:>5.2f} {r['ratio_plus']:>11.6f} {r['predicted_plus']:>9.6f} "
                f"{r['ratio_minus']:>12.6f} {r['predicted_minus']:>9.6f}  {r['ordering']}"
            )


if __name__ == "__main__":
    main()
