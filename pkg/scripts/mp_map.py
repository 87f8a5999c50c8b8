"""Empirical MP / mP verdicts on a (lambda, mu) grid for the Fucik pair, printed as character maps.

Legend: ``+`` principle holds, ``.`` it fails, ``!`` disagreement with the curve prediction.
"""

import argparse

import numpy as np

from lespectra.curves import SpectralCurve, classify
from lespectra.dirichlet import SystemProblem, build_witness_bank, mp_survey
from lespectra.eigen import ExponentPair
from lespectra.geometry import Field, make_uniform_grid
from lespectra.operators import fucik_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kappa", type=float, default=4.0)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=99)
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--battery", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    g = make_uniform_grid((0.0, 1.0), args.n)
    exps = ExponentPair(args.p, 1 / args.p)
    F1, F2 = fucik_pair(args.kappa)
    one, zero = Field.constant(g, 1.0), Field.zeros(g)
    base = SystemProblem(F1, F2, one, one, exps, 1.0, 1.0, zero, zero)
    bank_p, bank_m = build_witness_bank(base), build_witness_bank(base.reflected())
    plus = SpectralCurve(bank_p.plus.lambda1, exps.p, "plus")
    minus = SpectralCurve(bank_m.plus.lambda1, exps.p, "minus")
    top = 2 * max(plus.anchor, minus.anchor)
    axis = np.linspace(-0.2 * top, top, args.points)
    rng = np.random.default_rng(args.seed)
    print(f"lambda1+ = {plus.anchor:.5f}, lambda1- = {minus.anchor:.5f}")
    maps = {"MP": [], "mP": []}
    for mu in axis[::-1]:
        rows = {"MP": "", "mP": ""}
        for lam in axis:
            pred = classify(lam, mu, plus, minus)
            prob = base.with_params(lam=lam, mu=mu)
            for kind, bank, want in (("MP", bank_p, pred.mp_holds), ("mP", bank_m, pred.mP_holds)):
                got = mp_survey(prob, bank, rng, args.battery, kind).verdict
                rows[kind] += "!" if got != want else "+" if got else "."
        for kind in maps:
            maps[kind].append(f"{mu:8.2f} {rows[kind]}")
    for kind, lines in maps.items():
        print(f"\n{kind} (rows: mu, columns: lambda from {axis[0]:.1f} to {axis[-1]:.1f})")
        print("\n".join(lines))


if __name__ == "__main__":
    main()
