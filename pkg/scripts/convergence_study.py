"""Grid-refinement study of principal eigenvalues (scalar Laplacian, Pucci, Fucik system)."""

import argparse

import numpy as np

from lespectra.eigen import ExponentPair, scalar_principal_eigen, system_principal_eigen
from lespectra.geometry import Field, make_uniform_grid
from lespectra.operators import fucik_pair, laplacian, pucci_plus_op


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[24, 49, 99, 199, 399])
    args = ap.parse_args()
    F1, F2 = fucik_pair(4.0)
    exps = ExponentPair(2.0, 0.5)
    print(f"{'n':>5} {'laplace err':>12} {'pucci- err':>12} {'fucik+':>12} {'fucik-':>12}")
    prev = None
    for n in args.sizes:
        g = make_uniform_grid((0.0, 1.0), n)
        one = Field.constant(g, 1.0)
        lap = scalar_principal_eigen(laplacian(), one).lambda1 - np.pi**2
        puc = scalar_principal_eigen(pucci_plus_op(1, 2), one, "-").lambda1 - 2 * np.pi**2
        fp = system_principal_eigen(F1, F2, one, one, exps, "+").lambda1
        fm = system_principal_eigen(F1, F2, one, one, exps, "-").lambda1
        rate = "" if prev is None else f"  ratio {prev / lap:.3f}"
        print(f"{n:>5} {lap:>12.3e} {puc:>12.3e} {fp:>12.6f} {fm:>12.6f}{rate}")
        prev = lap


if __name__ == "__main__":
    main()
