"""Coupled Dirichlet problems and sign-principle experiments.

The system is ``F1[u] + lam tau1 |v|^(q-1) v = f1``, ``F2[v] + mu tau2 |u|^(p-1) u = f2``
with zero boundary values.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import root

from .geometry import Field, Grid, GridMismatchError, hopf_quotients, make_uniform_grid
from .operators import DiscreteOperator, OperatorSpec, discretize, lower_envelope, reflect
from .solve import DirichletProblem, SolveOptions, SolveReport, solve_nonlinear
from .eigen import EigenPair, ExponentPair, spow, system_principal_eigen


class MonotonicityError(RuntimeError):
    pass


class AuditError(ValueError):
    pass


@dataclass(frozen=True)
class SystemProblem:
    F1: OperatorSpec
    F2: OperatorSpec
    tau1: Field
    tau2: Field
    exps: ExponentPair
    lam: float
    mu: float
    f1: Field
    f2: Field

    def __post_init__(self):
        g = self.tau1.grid
        if any(x.grid != g for x in (self.tau2, self.f1, self.f2)):
            raise GridMismatchError("system data on different grids")
        if np.any(self.tau1.values < 0) or np.any(self.tau2.values < 0):
            raise ValueError("weights must be nonnegative")
        if not np.any((self.tau1.interior > 0) & (self.tau2.interior > 0)):
            raise ValueError("weight supports do not overlap")

    @property
    def grid(self) -> Grid:
        return self.tau1.grid

    def with_params(self, **kw) -> SystemProblem:
        return replace(self, **kw)

    def reflected(self) -> SystemProblem:
        """Problem solved by ``(-u, -v)`` when ``(u, v)`` solves this one."""
        return replace(self, F1=reflect(self.F1), F2=reflect(self.F2), f1=-self.f1, f2=-self.f2)


@dataclass
class PrincipleReport:
    kind: str
    verdict: Any
    witness: tuple[Field, Field] | None = None
    parameters: dict = field(default_factory=dict)
    table: list = field(default_factory=list)
    columns: tuple = ()

    def to_json(self) -> dict:
        out = {"kind": self.kind, "verdict": self.verdict, "parameters": self.parameters}
        out["has_witness"] = self.witness is not None
        if self.table:
            out["table"] = {"columns": list(self.columns), "rows": [list(r) for r in self.table]}
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.table:
                w.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])


# --- residuals and scalar substeps ---------------------------------------------------

class _System:
    """Discretized system with cached operators."""

    def __init__(self, prob: SystemProblem):
        self.prob = prob
        self.grid = prob.grid
        self.I = self.grid.interior
        self.d1 = discretize(prob.F1, self.grid)
        self.d2 = discretize(prob.F2, self.grid)
        self.t1 = prob.tau1.values[self.I]
        self.t2 = prob.tau2.values[self.I]
        self.f1 = prob.f1.interior
        self.f2 = prob.f2.interior

    def coupling(self, u, v):
        p = self.prob
        return p.lam * self.t1 * spow(v[self.I], p.exps.q), p.mu * self.t2 * spow(u[self.I], p.exps.p)

    def residuals(self, u, v):
        c1, c2 = self.coupling(u, v)
        r1 = self.d1.residual_values(u) + c1 - self.f1
        r2 = self.d2.residual_values(v) + c2 - self.f2
        scale = 1.0 + max(np.max(np.abs(self.f1)), np.max(np.abs(self.f2)), np.max(np.abs(c1)), np.max(np.abs(c2)))
        return r1, r2, float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / scale)

    def scalar(self, dop: DiscreteOperator, rhs: np.ndarray, guess: np.ndarray | None) -> np.ndarray:
        f = np.zeros(self.grid.size)
        f[self.I] = rhs
        init = None if guess is None else Field(self.grid, guess)
        w, rep = solve_nonlinear(DirichletProblem(dop, Field(self.grid, f)), SolveOptions(tol=1e-12, initial=init))
        return w.values


def _newton(sys_: _System, u, v, tol: float, max_iter: int = 100):
    """Semismooth Newton on the coupled scheme with a backtracking line search."""
    p = sys_.prob
    I, nI = sys_.I, sys_.I.size
    u, v = u.copy(), v.copy()
    r1, r2, res = sys_.residuals(u, v)
    for it in range(max_iter):
        if res <= tol:
            return u, v, it, res, True
        J1, _, _ = sys_.d1.linearize(u)
        J2, _, _ = sys_.d2.linearize(v)
        au, av = np.abs(u[I]), np.abs(v[I])
        av = np.maximum(av, 1e-8 * max(av.max(), 1.0)) if p.exps.q < 1 else av
        au = np.maximum(au, 1e-8 * max(au.max(), 1.0)) if p.exps.p < 1 else au
        dv = p.lam * sys_.t1 * p.exps.q * av ** (p.exps.q - 1)
        du = p.mu * sys_.t2 * p.exps.p * au ** (p.exps.p - 1)
        K = sp.bmat([[J1[:, I], sp.diags(dv)], [sp.diags(du), J2[:, I]]], format="csc")
        try:
            step = spla.splu(K).solve(-np.concatenate([r1, r2]))
        except RuntimeError:
            return u, v, it, res, False
        merit = np.linalg.norm(np.concatenate([r1, r2]))
        t = 1.0
        for _ in range(40):
            un, vn = u.copy(), v.copy()
            un[I] += t * step[:nI]
            vn[I] += t * step[nI:]
            s1, s2, sres = sys_.residuals(un, vn)
            if np.linalg.norm(np.concatenate([s1, s2])) < (1 - 1e-4 * t) * merit or sres <= tol:
                break
            t /= 2
        u, v, r1, r2, res = un, vn, s1, s2, sres
    return u, v, max_iter, res, res <= tol


def solve_system_newton(prob: SystemProblem, tol: float = 1e-8, init=None, max_iter: int = 100) -> tuple[Field, Field, SolveReport]:
    s = _System(prob)
    n = prob.grid.size
    u0, v0 = (np.zeros(n), np.zeros(n)) if init is None else (np.array(init[0].values), np.array(init[1].values))
    u, v, it, res, ok = _newton(s, u0, v0, tol, max_iter)
    return Field(prob.grid, u), Field(prob.grid, v), SolveReport(it, res, 0, ok, "newton")


def solve_system_picard(
    prob: SystemProblem,
    omega: float = 0.7,
    tol: float = 1e-8,
    max_iter: int = 300,
    newton_fallback: bool = True,
    init=None,
) -> tuple[Field, Field, SolveReport]:
    """Damped alternating scalar solves; falls back to coupled Newton on failure.

    Above the principal curves the damped map is repelling, so the fallback is
    what makes solves between the first and second curves possible.
    """
    s = _System(prob)
    grid = prob.grid
    n = grid.size
    if init is None:
        u, v = np.zeros(n), np.zeros(n)
    else:
        u, v = np.array(init[0].values), np.array(init[1].values)
    _, _, res = s.residuals(u, v)
    res0 = res
    gu = gv = None
    it, best, best_it = 0, res, 0
    blowup = 1e8 * (1 + max(np.max(np.abs(s.f1)), np.max(np.abs(s.f2)), np.max(np.abs(u)), np.max(np.abs(v))))
    for it in range(1, max_iter + 1):
        if res <= tol:
            it -= 1
            break
        c1, _ = s.coupling(u, v)
        gu = s.scalar(s.d1, s.f1 - c1, gu)
        u = u + omega * (gu - u)
        _, c2 = s.coupling(u, v)
        gv = s.scalar(s.d2, s.f2 - c2, gv)
        v = v + omega * (gv - v)
        _, _, res = s.residuals(u, v)
        size = max(np.max(np.abs(u)), np.max(np.abs(v)))
        if not np.isfinite(res) or res > 1e8 * max(res0, 1.0) or size > blowup:
            break
        if res < best:
            best, best_it = res, it
        elif it - best_it >= 25:  # no progress: the damped map is not contracting here
            break
    if res <= tol:
        return Field(grid, u), Field(grid, v), SolveReport(it, res, 0, True, "picard")
    if not newton_fallback:
        ok = np.all(np.isfinite(u)) and np.all(np.isfinite(v))
        return (Field(grid, u) if ok else Field.zeros(grid)), (Field(grid, v) if ok else Field.zeros(grid)), SolveReport(it, res, 0, False, "picard")
    start = (u, v) if np.isfinite(res) and res < res0 else (np.zeros(n), np.zeros(n))
    if init is not None and not (np.isfinite(res) and res < res0):
        start = (np.array(init[0].values), np.array(init[1].values))
    un, vn, nit, nres, ok = _newton(s, *start, tol)
    return Field(grid, un), Field(grid, vn), SolveReport(it + nit, nres, 0, ok, "newton")


def solve_system_monotone_signed(prob: SystemProblem, tol: float = 1e-10, max_iter: int = 5000) -> tuple[Field, Field, SolveReport]:
    """Monotone iteration from ``(0, 0)`` for sign-definite data.

    ``f1, f2 <= 0`` gives the nonnegative solution; ``f1, f2 >= 0`` is handled
    by reflection and gives the nonpositive one.
    """
    f1, f2 = prob.f1.values, prob.f2.values
    if np.all(f1 >= 0) and np.all(f2 >= 0) and (np.any(f1) or np.any(f2)):
        u, v, rep = solve_system_monotone_signed(prob.reflected(), tol, max_iter)
        return -u, -v, rep
    if np.any(f1 > 0) or np.any(f2 > 0):
        raise ValueError("data must be sign-definite")
    if not (prob.lam > 0 and prob.mu > 0):
        raise ValueError("lambda and mu must be positive")
    n = prob.grid.size
    return _monotone_from(_System(prob), np.zeros(n), np.zeros(n), tol, max_iter)


def _monotone_from(s: _System, u, v, tol, max_iter):
    grid = s.grid
    gu = gv = None
    res = np.inf
    for it in range(1, max_iter + 1):
        c1, c2 = s.coupling(u, v)
        un = s.scalar(s.d1, s.f1 - c1, gu)
        vn = s.scalar(s.d2, s.f2 - c2, gv)
        slack = 1e-9 * (1 + max(np.max(np.abs(un)), np.max(np.abs(vn))))
        if np.any(un < u - slack) or np.any(vn < v - slack):
            raise MonotonicityError(f"monotone iteration decreased at sweep {it}")
        step = max(np.max(np.abs(un - u)), np.max(np.abs(vn - v)))
        u, v, gu, gv = un, vn, un, vn
        _, _, res = s.residuals(u, v)
        if res <= tol or step <= 1e-15 * (1 + np.max(np.abs(u)) + np.max(np.abs(v))):
            break
    return Field(grid, u), Field(grid, v), SolveReport(it, res, 0, bool(res <= max(tol, 1e-8)), "monotone")


# --- sublinear regime -------------------------------------------------------------------

@dataclass
class SublinearResult:
    u: Field
    v: Field
    report: SolveReport
    eps: float
    k: float
    start_gap: float  # sup difference between the two admissible starts' limits


def _audit_sub(s: _System, u, v, tol=1e-10) -> bool:
    r1, r2, _ = s.residuals(u, v)
    scale = 1 + max(np.max(np.abs(u)), np.max(np.abs(v)))
    return bool(np.all(r1 >= -tol * scale) and np.all(r2 >= -tol * scale))


def solve_sublinear(prob: SystemProblem, tol: float = 1e-10, max_iter: int = 20000, eig: EigenPair | None = None) -> SublinearResult:
    """Positive solution for ``pq < 1`` and ``f <= 0`` by monotone iteration from a small subsolution.

    The subsolution is ``(eps phi, eps^k psi)`` built from the principal pair of
    the concave envelopes with exponents ``(p, 1/p)``.
    """
    p, q = prob.exps.p, prob.exps.q
    if p * q >= 1:
        raise ValueError("solve_sublinear needs pq < 1")
    if np.any(prob.f1.values > 0) or np.any(prob.f2.values > 0):
        raise ValueError("data must be nonpositive")
    if not (prob.lam > 0 and prob.mu > 0):
        raise ValueError("lambda and mu must be positive")
    if eig is None:
        eig = system_principal_eigen(
            lower_envelope(prob.F1), lower_envelope(prob.F2), prob.tau1, prob.tau2, ExponentPair(p, 1 / p)
        )
    phi, psi, l1 = eig.u.values, eig.v.values, eig.lambda1
    k = (p + 1 / q) / 2
    npsi = np.max(psi)
    eps = min(
        (prob.lam * npsi ** ((p * q - 1) / p) / l1) ** (1 / (1 - k * q)),
        (prob.mu / l1) ** (1 / (k - p)),
    ) / 2
    s = _System(prob)
    for _ in range(21):
        if _audit_sub(s, eps * phi, eps**k * psi):
            break
        eps /= 2
    else:
        raise AuditError("subsolution inequality fails at every tried eps")
    u, v, rep = _monotone_from(s, eps * phi, eps**k * psi, tol, max_iter)
    e2 = eps / 4
    u2, v2, _ = _monotone_from(s, e2 * phi, e2**k * psi, tol, max_iter)
    gap = float(max(np.max(np.abs(u.values - u2.values)), np.max(np.abs(v.values - v2.values))))
    return SublinearResult(u, v, rep, eps, k, gap)


def sublinear_shooting_oracle(exps: ExponentPair, lam: float, mu: float, slopes0=(1.0, 1.0), x=None):
    """Positive solution of the 1D Laplacian system on (0, 1) with zero data, by shooting.

    Returns the initial slopes ``(u'(0), v'(0))``, and the profiles at ``x`` if given.
    """
    def rhs(_, y):
        u, du, v, dv = y
        return [du, -lam * spow(v, exps.q), dv, -mu * spow(u, exps.p)]

    def shoot(ab, **kw):
        return solve_ivp(rhs, (0, 1), [0, ab[0], 0, ab[1]], method="DOP853", rtol=1e-12, atol=1e-13, **kw)

    out = root(lambda ab: shoot(ab).y[[0, 2], -1], np.asarray(slopes0, dtype=float), tol=1e-12)
    if not out.success:
        raise RuntimeError(f"shooting failed: {out.message}")
    slopes = (float(out.x[0]), float(out.x[1]))
    if x is None:
        return slopes
    sol = shoot(out.x, dense_output=True)
    y = sol.sol(np.asarray(x, dtype=float))
    return slopes, y[0], y[2]


# --- maximum principle experiments ------------------------------------------------------------

def audit_subsolution(prob: SystemProblem, u: Field, v: Field, rtol: float = 1e-9) -> bool:
    """Discrete check of ``F1[u] + lam tau1 |v|^(q-1) v >= 0`` (and partner), ``u, v <= 0`` on the boundary."""
    s = _System(prob.with_params(f1=Field.zeros(prob.grid), f2=Field.zeros(prob.grid)))
    c1, c2 = s.coupling(u.values, v.values)
    L1 = s.d1.residual_values(u.values)
    L2 = s.d2.residual_values(v.values)
    s1 = rtol * (1 + np.max(np.abs(L1)) + np.max(np.abs(c1)))
    s2 = rtol * (1 + np.max(np.abs(L2)) + np.max(np.abs(c2)))
    bnd_ok = np.all(u.on_boundary <= 0) and np.all(v.on_boundary <= 0)
    return bool(bnd_ok and np.all(L1 + c1 >= -s1) and np.all(L2 + c2 >= -s2))


def mp_check(prob: SystemProblem, u: Field, v: Field, tol: float = 1e-9) -> PrincipleReport:
    """Sign conclusion of MP for one audited subsolution pair."""
    if not audit_subsolution(prob, u, v):
        raise AuditError("pair is not a discrete subsolution")
    scale = 1 + max(np.max(np.abs(u.values)), np.max(np.abs(v.values)))
    ok = bool(np.max(u.values) <= tol * scale and np.max(v.values) <= tol * scale)
    return PrincipleReport("MP", ok, None if ok else (u, v), {"lambda": prob.lam, "mu": prob.mu})


def _random_smooth_nonneg(grid: Grid, rng: np.random.Generator, modes: int = 4) -> Field:
    vals = np.full(grid.size, rng.random())
    for ax, (a, b) in enumerate(grid.extents):
        x = (grid.points[:, ax] - a) / (b - a)
        for k in range(1, modes + 1):
            vals = vals + rng.random() / k * (1 + np.cos(k * np.pi * x + 2 * np.pi * rng.random()))
    vals = vals / np.max(vals)
    vals[grid.boundary] = 0.0
    return Field(grid, vals)


@dataclass
class WitnessBank:
    """Eigenpairs reused across survey points; ``mixed_*`` are principal pairs of half-reflected systems."""

    plus: EigenPair
    mixed_first: EigenPair | None = None  # (F1, reflect F2)
    mixed_second: EigenPair | None = None  # (reflect F1, F2)


def build_witness_bank(prob: SystemProblem, need_negative: bool = True) -> WitnessBank:
    args = (prob.tau1, prob.tau2, prob.exps)
    bank = WitnessBank(system_principal_eigen(prob.F1, prob.F2, *args))
    if need_negative:
        bank.mixed_first = system_principal_eigen(prob.F1, reflect(prob.F2), *args)
        bank.mixed_second = system_principal_eigen(reflect(prob.F1), prob.F2, *args)
    return bank


def _candidates(prob: SystemProblem, bank: WitnessBank, rng, battery: int):
    """Subsolution candidates: random-data solves and eigenpair constructions."""
    grid = prob.grid
    p, lam, mu = prob.exps.p, prob.lam, prob.mu
    phi, psi, l1 = bank.plus.u, bank.plus.v, bank.plus.lambda1
    if lam > 0:
        yield "eigen", phi, psi * (l1 / lam) ** p
    if lam < 0 and bank.mixed_first is not None:
        e = bank.mixed_first
        t = 0.5 * abs(lam) / e.lambda1
        if mu < 0:
            t = min(t, 0.5 * (e.lambda1 / abs(mu)) ** (1 / p))
        yield "negative_lambda", e.u * t, e.v * -1.0
    if mu < 0 and bank.mixed_second is not None:
        e = bank.mixed_second
        t = 0.5 * abs(mu) / e.lambda1
        if lam < 0:
            t = min(t, 0.5 * (e.lambda1 / abs(lam)) ** (1 / prob.exps.q))
        yield "negative_mu", e.u * -1.0, e.v * t
    for _ in range(battery):
        f1 = _random_smooth_nonneg(grid, rng)
        f2 = _random_smooth_nonneg(grid, rng)
        u, v, rep = solve_system_picard(prob.with_params(f1=f1, f2=f2), tol=1e-10, newton_fallback=False)
        if rep.converged:
            yield "random", u, v


def mp_survey(prob: SystemProblem, bank: WitnessBank, rng: np.random.Generator | None = None, battery: int = 4, kind: str = "MP") -> PrincipleReport:
    """Empirical MP (or mP) verdict at ``(prob.lam, prob.mu)``.

    Every candidate passing the subsolution audit is checked for the sign
    conclusion; the first violator is returned as witness.  ``kind="mP"`` runs
    the same test on the reflected system (``bank`` must then be built for it).
    """
    rng = rng or np.random.default_rng(0)
    if kind == "mP":
        rep = mp_survey(prob.reflected(), bank, rng, battery, "MP")
        w = None if rep.witness is None else (-rep.witness[0], -rep.witness[1])
        return replace(rep, kind="mP", witness=w)
    tested = 0
    for label, u, v in _candidates(prob, bank, rng, battery):
        if not audit_subsolution(prob, u, v):
            continue
        tested += 1
        rep = mp_check(prob, u, v)
        if not rep.verdict:
            rep.parameters.update(tested=tested, witness_source=label)
            return rep
    return PrincipleReport("MP", True, None, {"lambda": prob.lam, "mu": prob.mu, "tested": tested})


# --- scans ------------------------------------------------------------------------------------------

def _diag_problem(F1, F2, tau1, tau2, exps, f1, f2, lam) -> SystemProblem:
    return SystemProblem(F1, F2, tau1, tau2, exps, lam, lam, f1, f2)


def amp_scan(
    F1: OperatorSpec,
    F2: OperatorSpec,
    tau1: Field,
    tau2: Field,
    exps: ExponentPair,
    f1: Field,
    f2: Field,
    rel_offsets=None,
    tol: float = 1e-9,
) -> PrincipleReport:
    """Scan ``lam = mu`` just above the negative principal eigenvalue for strictly negative solutions.

    ``verdict`` is the width of the largest scanned interval ``(l1-, l1- + width)``
    with strictly negative solutions at every sample (0 if none).
    """
    if np.any(f1.values > 0) or np.any(f2.values > 0) or not (np.any(f1.values) or np.any(f2.values)):
        raise ValueError("AMP data must be nonpositive and nonzero")
    plus = system_principal_eigen(F1, F2, tau1, tau2, exps, "+")
    minus = system_principal_eigen(F1, F2, tau1, tau2, exps, "-")
    if plus.lambda1 > minus.lambda1 * (1 + 1e-9):
        rep = amp_scan(reflect(F1), reflect(F2), tau1, tau2, exps, -f1, -f2, rel_offsets, tol)
        rep.parameters["mirrored"] = True
        return rep
    offsets = np.sort(np.geomspace(1e-4, 3.0, 30) if rel_offsets is None else np.asarray(rel_offsets, dtype=float))
    lm = minus.lambda1
    grid = tau1.grid
    p = exps.p
    I = grid.interior

    def best_scaling(s: _System, u, v):
        """Gauge-orbit point ``(t u, t^p v)`` with the smallest residual."""
        best = None
        for t in np.geomspace(1e-4, 1e4, 81):
            r = s.residuals(t * u, t**p * v)[2]
            if best is None or r < best[0]:
                best = (r, t * u, t**p * v)
        return Field(grid, best[1]), Field(grid, best[2])

    # continue outward from a moderate offset; solutions blow up near the eigenvalue
    start = int(np.argmin(np.abs(np.log(offsets / 0.02))))
    order = list(range(start, len(offsets))) + list(range(start - 1, -1, -1))
    results = {}
    prev, prev_off = None, None
    for k in order:
        if k == start - 1:
            prev, prev_off = (results[start][:2], offsets[start]) if results[start][2].converged else (None, None)
        off = offsets[k]
        prob = _diag_problem(F1, F2, tau1, tau2, exps, f1, f2, lm * (1 + off))
        if prev is None:
            init = best_scaling(_System(prob), minus.u.values, minus.v.values)
        elif off < prev_off:
            # amplitude grows like 1/offset along the gauge orbit
            t = prev_off / off
            init = (prev[0] * t, prev[1] * t**p)
        else:
            init = prev
        u, v, rep = solve_system_newton(prob, tol=tol, init=init)
        results[k] = (u, v, rep)
        if rep.converged:
            prev, prev_off = (u, v), off

    rows, width, first_fail = [], 0.0, None
    for k, off in enumerate(offsets):
        u, v, rep = results[k]
        lam = lm * (1 + off)
        negative = bool(rep.converged and np.all(u.values[I] < 0) and np.all(v.values[I] < 0))
        rows.append((float(lam), float(off), rep.converged, negative, float(np.max(u.values[I])), float(np.max(v.values[I]))))
        if negative and first_fail is None:
            width = lam - lm
        elif first_fail is None:
            first_fail = float(lam)
    return PrincipleReport(
        "AMP",
        float(width),
        None,
        {"lambda1_plus": plus.lambda1, "lambda1_minus": lm, "first_failure": first_fail},
        rows,
        ("lambda", "offset", "converged", "negative", "max_u", "max_v"),
    )


def _interval_instance(L: float, n: int, F1, F2, exps, lam, mu, tau_scale: float, cap: float, battery: int, seed: int) -> bool:
    """MP conclusion on (0, L) over a random battery of nonnegative-data solves."""
    grid = make_uniform_grid((0.0, L), n)
    tau = Field.constant(grid, tau_scale)
    rng = np.random.default_rng(seed)
    zero = Field.zeros(grid)
    base = SystemProblem(F1, F2, tau, tau, exps, lam, mu, zero, zero)
    for _ in range(battery):
        f1 = _random_smooth_nonneg(grid, rng) * cap
        f2 = _random_smooth_nonneg(grid, rng) * cap
        prob = base.with_params(f1=f1, f2=f2)
        u, v, rep = solve_system_newton(prob, tol=1e-10)
        if not rep.converged:
            u, v, rep = solve_system_picard(prob, tol=1e-10)
        if not rep.converged:
            return False
        if not audit_subsolution(prob, u, v):
            raise AuditError("battery solution fails the subsolution audit")
        if not mp_check(prob, u, v).verdict:
            return False
    return True


def small_domain_threshold(
    F1: OperatorSpec,
    F2: OperatorSpec,
    exps: ExponentPair,
    lam: float,
    mu: float,
    L_max: float = 2.0,
    n: int = 199,
    battery: int = 32,
    cap: float = 1.0,
    seed: int = 0,
    rel_tol: float = 2e-3,
    weight_length: float | None = None,
) -> PrincipleReport:
    """Largest interval length (and weight multiplier) keeping MP on a random battery."""
    if exps.p * exps.q < 1:
        raise ValueError("small-domain threshold needs pq >= 1")
    if lam < 0 or mu < 0:
        raise ValueError("lambda and mu must be nonnegative")
    holds = lambda L, s=1.0: _interval_instance(L, n, F1, F2, exps, lam, mu, s, cap, battery, seed)

    def bisect(fn, lo, hi):
        if fn(hi):
            return hi
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if fn(mid) else (lo, mid)
        return 0.5 * (lo + hi)

    L_star = bisect(holds, 0.0, L_max)
    params = {"lambda": lam, "mu": mu, "p": exps.p, "q": exps.q, "battery": battery, "cap": cap, "L_max": L_max}
    if weight_length is not None:
        params["weight_length"] = weight_length
        params["weight_threshold"] = bisect(lambda s: holds(weight_length, s), 0.0, 16.0)
    return PrincipleReport("small_domain", float(L_star), None, params)


def _probe_residual(s: _System, lam: float, rng, sweeps: int, starts: int) -> float:
    """Best eigen-residual reachable by frozen-policy inverse iteration at ``lam = mu``."""
    p, q = s.prob.exps.p, s.prob.exps.q
    I, nI, n = s.I, s.I.size, s.grid.size
    best = np.inf
    for k in range(starts):
        if k == 0:
            u = s.grid.distance_profile()
            v = u.copy()
        else:
            u = rng.standard_normal(n)
            v = rng.standard_normal(n)
            u[s.grid.boundary] = v[s.grid.boundary] = 0
        u, v = u / np.max(np.abs(u)), v / np.max(np.abs(v))
        for _ in range(sweeps):
            J1, _, _ = s.d1.linearize(u)
            J2, _, _ = s.d2.linearize(v)
            # secant linearization of the power couplings
            sv = np.abs(v[I]) ** (q - 1) if q != 1 else np.ones(nI)
            su = np.abs(u[I]) ** (p - 1) if p != 1 else np.ones(nI)
            sv = np.where(np.isfinite(sv), sv, 0.0)
            su = np.where(np.isfinite(su), su, 0.0)
            K = sp.bmat(
                [[J1[:, I], sp.diags(lam * s.t1 * sv)], [sp.diags(lam * s.t2 * su), J2[:, I]]], format="csc"
            )
            try:
                z = spla.splu(K).solve(np.concatenate([u[I], v[I]]))
            except RuntimeError:
                return 0.0  # exactly singular frozen operator
            u, v = np.zeros(n), np.zeros(n)
            u[I], v[I] = z[:nI], z[nI:]
            nu, nv = np.max(np.abs(u)), np.max(np.abs(v))
            if nu == 0 or nv == 0:
                break
            u, v = u / nu, v / nv
            c1 = lam * s.t1 * spow(v[I], q)
            c2 = lam * s.t2 * spow(u[I], p)
            r1 = s.d1.residual_values(u) + c1
            r2 = s.d2.residual_values(v) + c2
            r = max(np.max(np.abs(r1)) / np.max(np.abs(c1)), np.max(np.abs(r2)) / np.max(np.abs(c2)))
            best = min(best, float(r))
    return best


def isolation_scan(
    F1: OperatorSpec,
    F2: OperatorSpec,
    tau1: Field,
    tau2: Field,
    exps: ExponentPair,
    lams,
    sweeps: int = 50,
    starts: int = 4,
    seed: int = 0,
) -> PrincipleReport:
    """Residual-vs-lambda table of the eigen probe along the diagonal ``lam = mu``."""
    rng = np.random.default_rng(seed)
    zero = Field.zeros(tau1.grid)
    rows = []
    for lam in lams:
        s = _System(_diag_problem(F1, F2, tau1, tau2, exps, zero, zero, float(lam)))
        rows.append((float(lam), _probe_residual(s, float(lam), rng, sweeps, starts)))
    res = np.array([r[1] for r in rows])
    return PrincipleReport(
        "isolation",
        float(np.min(res)),
        None,
        {"sweeps": sweeps, "starts": starts, "seed": seed},
        rows,
        ("lambda", "residual"),
    )


def solution_is_positive(u: Field, v: Field) -> bool:
    """Strictly positive inside with positive inward boundary derivatives."""
    if not (np.all(u.interior > 0) and np.all(v.interior > 0)):
        return False
    hu, hv = hopf_quotients(u), hopf_quotients(v)
    return bool(np.all(hu > 0) and np.all(hv > 0))
