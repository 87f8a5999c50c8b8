"""End-to-end acceptance criteria; each test records one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the summary is printed at the end)
or ``python tests/test_acceptance.py`` for the lines alone.
"""

import time

import numpy as np
import pytest
from randops import random_jet, random_operator, random_psd, random_sym

from lespectra.cli import verify_fucik
from lespectra.curves import SpectralCurve, anchor_recovery, classify, curve_mu
from lespectra.dirichlet import (
    SystemProblem,
    amp_scan,
    build_witness_bank,
    isolation_scan,
    mp_survey,
    small_domain_threshold,
    solution_is_positive,
    solve_sublinear,
    solve_system_picard,
)
from lespectra.eigen import (
    ExponentPair,
    gauge_distance,
    scalar_principal_eigen,
    second_eigen_linear_symmetric,
    shooting_eigenvalue,
    system_principal_eigen,
)
from lespectra.geometry import Field, hopf_quotients, make_uniform_grid
from lespectra.operators import (
    KINDS,
    EllipticityPair,
    LinearOpSpec,
    evaluate,
    extremal_value,
    fucik_pair,
    laplacian,
    lower_envelope,
    pucci_minus,
    pucci_plus,
    pucci_plus_op,
    reflect,
    structure_bounds,
    upper_envelope,
)

PI2 = np.pi**2
RESULTS: list[str] = []


def record(num: int, name: str, ok: bool, detail: str, t0: float) -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {name}  ({detail}; {time.perf_counter() - t0:.1f}s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def g199():
    return make_uniform_grid((0.0, 1.0), 199)


def ones(g):
    return Field.constant(g, 1.0)


def rel(a, b):
    return abs(a / b - 1)


def test_01_scalar_laplacian_eigenvalue():
    t0 = time.perf_counter()
    errs, vals = [], []
    for n in (99, 199):
        g = make_uniform_grid((0.0, 1.0), n)
        lam = scalar_principal_eigen(laplacian(), ones(g)).lambda1
        h = 1 / (n + 1)
        T = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
        oracle = np.linalg.eigvalsh(T)[0]
        vals.append((lam, oracle))
        errs.append(abs(lam - PI2))
    lam, oracle = vals[1]
    ratio = errs[0] / errs[1]
    ok = rel(lam, PI2) <= 1e-2 and rel(lam, oracle) <= 1e-8 and ratio >= 3.5
    record(1, "scalar Laplacian eigenvalue", ok, f"lambda1={lam:.6f}, rel err {rel(lam, PI2):.2e}, oracle gap {rel(lam, oracle):.1e}, error ratio {ratio:.3f}", t0)


def test_02_pucci_half_eigenvalues(g199):
    t0 = time.perf_counter()
    op = pucci_plus_op(1.0, 2.0)
    lp = scalar_principal_eigen(op, ones(g199), "+").lambda1
    lm = scalar_principal_eigen(op, ones(g199), "-").lambda1
    ok = rel(lp, PI2) <= 1e-2 and rel(lm, 2 * PI2) <= 1e-2
    record(2, "Pucci half-eigenvalues", ok, f"plus={lp:.5f} (pi^2), minus={lm:.5f} (2pi^2)", t0)


def test_03_system_laplacian_pair(g199):
    t0 = time.perf_counter()
    e = system_principal_eigen(laplacian(), laplacian(), ones(g199), ones(g199), ExponentPair(1.0, 1.0))
    diff = float(np.max(np.abs(e.u.values - e.v.values)))
    ok = rel(e.lambda1, PI2) <= 1e-2 and diff <= 1e-8
    record(3, "system eigenvalue, Laplacian pair", ok, f"lambda1={e.lambda1:.6f}, sup|u-v|={diff:.1e}", t0)


def test_04_fucik_example(g199):
    t0 = time.perf_counter()
    worst, orders, ok = 0.0, [], True
    for kappa in (2.0, 4.0):
        for p, q in ((1.0, 1.0), (2.0, 0.5), (0.5, 2.0)):
            r = verify_fucik(kappa, p, q, g199)
            worst = max(worst, r["rel_err_plus"], r["rel_err_minus"])
            orders.append(r["ordering"] == r["ordering_expected"])
            ok &= r["converged"] and r["rel_err_plus"] <= 1e-2 and r["rel_err_minus"] <= 1e-2
    ok &= all(orders)
    record(4, "Fucik closed-form ratios and ordering", ok, f"worst ratio error {worst:.1e}, ordering {sum(orders)}/6", t0)


def test_05_asymmetric_exponents_vs_shooting(g199):
    t0 = time.perf_counter()
    exps = ExponentPair(2.0, 0.5)
    lam = system_principal_eigen(laplacian(), laplacian(), ones(g199), ones(g199), exps).lambda1
    shot = shooting_eigenvalue(exps)
    record(5, "(p,q)=(2,1/2) vs shooting oracle", rel(lam, shot) <= 1e-2, f"system {lam:.6f}, shooting {shot:.6f}, rel {rel(lam, shot):.1e}", t0)


def test_06_curve_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        a, p = float(rng.uniform(0.1, 100)), float(rng.uniform(0.1, 10))
        lam = float(rng.uniform(0.01, 1000))
        c = SpectralCurve(a, p)
        worst = max(worst, rel(curve_mu(c, a), a), rel(anchor_recovery(lam, curve_mu(c, lam), p), a))
    record(6, "curve algebra exact", worst <= 1e-14, f"worst relative error {worst:.1e} over 100 cases", t0)


def test_07_simplicity_multistart(g199):
    t0 = time.perf_counter()
    F1, F2 = fucik_pair(4.0)
    cases = [
        ("Laplacian pair", laplacian(), laplacian(), ExponentPair(1.0, 1.0), "+"),
        ("Fucik (2,1/2) +", F1, F2, ExponentPair(2.0, 0.5), "+"),
        ("Fucik (2,1/2) -", F1, F2, ExponentPair(2.0, 0.5), "-"),
    ]
    worst = 0.0
    for _, A, B, exps, sign in cases:
        ref = system_principal_eigen(A, B, ones(g199), ones(g199), exps, sign)
        rng = np.random.default_rng(7)
        for _ in range(10):
            other = system_principal_eigen(A, B, ones(g199), ones(g199), exps, sign, rng=rng)
            worst = max(worst, gauge_distance(ref, other, exps.p))
    record(7, "simplicity up to gauge (10 random starts x 3 instances)", worst <= 1e-6, f"worst gauge distance {worst:.1e}", t0)


def test_08_mp_characterization(g199):
    t0 = time.perf_counter()
    exps = ExponentPair(2.0, 0.5)
    F1, F2 = fucik_pair(4.0)
    zero = Field.zeros(g199)
    base = SystemProblem(F1, F2, ones(g199), ones(g199), exps, 1.0, 1.0, zero, zero)
    bank_p, bank_m = build_witness_bank(base), build_witness_bank(base.reflected())
    plus = SpectralCurve(bank_p.plus.lambda1, exps.p, "plus")
    minus = SpectralCurve(bank_m.plus.lambda1, exps.p, "minus")
    lams, mus = (-4.0, 8.0, 14.0, 22.0, 40.0), (-3.0, 6.0, 12.0, 25.0, 50.0)
    rng = np.random.default_rng(8)
    agree, total, margin = 0, 0, np.inf
    for lam in lams:
        for mu in mus:
            if lam > 0 and mu > 0:
                a = anchor_recovery(lam, mu, exps.p)
                margin = min(margin, rel(a, plus.anchor), rel(a, minus.anchor))
            pred = classify(lam, mu, plus, minus)
            prob = base.with_params(lam=lam, mu=mu)
            mp = mp_survey(prob, bank_p, rng, 4, "MP").verdict
            mP = mp_survey(prob, bank_m, rng, 4, "mP").verdict
            agree += (mp == pred.mp_holds) and (mP == pred.mP_holds)
            total += 1
    ok = agree == 25 and margin >= 0.02
    record(8, "MP/mP characterization on 5x5 grid", ok, f"{agree}/{total} agree, closest curve distance {margin:.1%}", t0)


def test_09_anti_maximum_principle(g199):
    t0 = time.perf_counter()
    exps = ExponentPair(2.0, 0.5)
    F1, F2 = fucik_pair(4.0)
    f = Field(g199, np.where(g199.boundary_mask, 0.0, -1.0))
    rep = amp_scan(F1, F2, ones(g199), ones(g199), exps, f, f)
    lm = rep.parameters["lambda1_minus"]
    ordered = rep.parameters["lambda1_plus"] <= lm
    fail = rep.parameters.get("first_failure")
    ok = ordered and rep.verdict >= 1e-3 * lm and fail is not None
    record(9, "anti-maximum principle scan", ok, f"lambda1-={lm:.4f}, Delta={rep.verdict:.4f} ({rep.verdict / lm:.1%}), first failure at {fail}", t0)


def test_10_second_eigenvalue(g199):
    t0 = time.perf_counter()
    one = ones(g199)
    exps = ExponentPair(1.0, 1.0)
    l2 = second_eigen_linear_symmetric(LinearOpSpec(), one)
    l1 = system_principal_eigen(laplacian(), laplacian(), one, one, exps).lambda1
    mid = 0.5 * (l1 + l2)
    rep = isolation_scan(laplacian(), laplacian(), one, one, exps, [l1, 0.9 * mid, mid, 1.1 * mid])
    on = rep.table[0][1]
    off = min(r[1] for r in rep.table[1:])
    f = Field(g199, np.where(g199.boundary_mask, 0.0, -1.0))
    solved = []
    for lam in np.linspace(1.1 * l1, 0.9 * l2, 7)[1:-1]:
        prob = SystemProblem(laplacian(), laplacian(), one, one, exps, lam, lam, f, f)
        solved.append(solve_system_picard(prob)[2].converged)
    ok = rel(l2, 4 * PI2) <= 1e-2 and off >= 1e3 * on and all(solved)
    record(10, "second eigenvalue, isolation, solvability", ok, f"lambda2={l2:.4f}, residual on/off {on:.1e}/{off:.1e}, solves {sum(solved)}/5", t0)


def test_11_sublinear_regime(g199):
    t0 = time.perf_counter()
    f = Field.zeros(g199)
    prob = SystemProblem(laplacian(), laplacian(), ones(g199), ones(g199), ExponentPair(0.5, 1.0), PI2, PI2, f, f)
    res = solve_sublinear(prob)
    hopf = min(hopf_quotients(res.u).min(), hopf_quotients(res.v).min())
    ok = res.report.converged and res.start_gap <= 1e-6 and solution_is_positive(res.u, res.v)
    record(11, "sublinear regime", ok, f"residual {res.report.residual:.1e}, start gap {res.start_gap:.1e}, min Hopf quotient {hopf:.3f}", t0)


def test_12_small_domain():
    t0 = time.perf_counter()
    rep = small_domain_threshold(laplacian(), laplacian(), ExponentPair(1.0, 1.0), 2 * PI2, 2 * PI2)
    L = rep.verdict
    record(12, "small-domain MP threshold", rel(L, 1 / np.sqrt(2)) <= 0.1, f"L*={L:.4f} vs 1/sqrt2={1 / np.sqrt(2):.4f}", t0)


def test_13_operator_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    N, d, tol = 10_000, 2, 1e-9
    fails = {}
    e = EllipticityPair(0.7, 2.3)
    X, Y, P = random_sym(rng, N, d, 3.0), random_sym(rng, N, d, 3.0), random_psd(rng, N, d)
    fails["duality"] = int(np.sum(np.abs(pucci_minus(X, e) + pucci_plus(-X, e)) > tol))
    fails["subadditivity"] = int(np.sum(pucci_plus(X + Y, e) > pucci_plus(X, e) + pucci_plus(Y, e) + tol)) + int(
        np.sum(pucci_minus(X + Y, e) < pucci_minus(X, e) + pucci_minus(Y, e) - tol)
    )
    trP = np.trace(P, axis1=1, axis2=2)
    dp = pucci_plus(X + P, e) - pucci_plus(X, e)
    fails["monotonicity"] = int(np.sum((dp < e.alpha * trP - tol) | (dp > e.beta * trP + tol)))
    env = h1 = invol = homog = 0
    for kind in KINDS:
        op = random_operator(rng, kind, N, d)
        x, r, xi, X = random_jet(rng, N, d)
        b = structure_bounds(op, x)
        chain = [
            extremal_value(b, -1, r, xi, X),
            evaluate(lower_envelope(op), x, r, xi, X),
            evaluate(op, x, r, xi, X),
            evaluate(upper_envelope(op), x, r, xi, X),
            extremal_value(b, 1, r, xi, X),
        ]
        env += int(sum(np.sum(lo > hi + tol) for lo, hi in zip(chain, chain[1:])))
        base = chain[2]
        # (H1): ellipticity in X, Lipschitz in (r, xi)
        P = random_psd(rng, N, d)
        s, eta = rng.normal(size=N), rng.normal(size=(N, d))
        dX = evaluate(op, x, r, xi, X + P) - base
        tr = np.trace(P, axis1=1, axis2=2)
        lip = np.abs(evaluate(op, x, s, eta, X) - base)
        bound = b.gamma * np.linalg.norm(xi - eta, axis=1) + b.theta * np.abs(r - s)
        h1 += int(np.sum((dX < b.alpha * tr - tol) | (dX > b.beta * tr + tol) | (lip > bound + tol)))
        invol += int(reflect(reflect(op)) != op)
        invol += int(np.sum(np.abs(evaluate(reflect(op), x, r, xi, X) + evaluate(op, x, -r, -xi, -X)) > tol))
        t = rng.uniform(0.01, 100, N)
        scaled = evaluate(op, x, t * r, t[:, None] * xi, t[:, None, None] * X)
        homog += int(np.sum(np.abs(scaled - t * base) > tol * (1 + t * np.abs(base))))
    fails.update(envelopes=env, H1=h1, reflection=invol, homogeneity=homog)
    total = sum(fails.values())
    detail = ", ".join(f"{k} {v}" for k, v in fails.items())
    record(13, f"operator property suite ({N} cases each, {len(KINDS)} kinds)", total == 0, f"failures: {detail}", t0)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
