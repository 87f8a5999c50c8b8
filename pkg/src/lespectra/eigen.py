"""Principal half-eigenvalues of scalar operators and of coupled Lane-Emden systems."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .geometry import Field, Grid, GridMismatchError, lp_norm, sup_norm, write_field_csv
from .operators import (
    DiscreteOperator,
    LinearOpSpec,
    OperatorSpec,
    discretize,
    reflect,
    sample_coef,
    zero_order_upper,
)
from .solve import DirichletProblem, SolveOptions, solve_nonlinear


class PositivityLossError(RuntimeError):
    pass


class EigenConvergenceError(RuntimeError):
    pass


def spow(x, e: float):
    """Odd power ``|x|^(e-1) x``, zero at zero."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** e


@dataclass(frozen=True)
class ExponentPair:
    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("exponents must be positive")

    @property
    def regime(self) -> str:
        pq = self.p * self.q
        if abs(pq - 1) <= 1e-12:
            return "pq_equal_1"
        return "sublinear" if pq < 1 else "superlinear"


@dataclass
class EigenPair:
    lambda1: float
    u: Field
    v: Field | None
    sign: str
    residual: float
    iterations: int
    lambda_raw: tuple[float, float]
    converged: bool = True
    c0: float | None = None  # sup-norm of v in the gauge sup u = 1

    def to_json(self) -> dict:
        out = {
            "lambda1": self.lambda1,
            "sign": self.sign,
            "residual": self.residual,
            "iterations": self.iterations,
            "lambda_raw": list(self.lambda_raw),
            "converged": self.converged,
        }
        if self.c0 is not None:
            out["c0"] = self.c0
        return out

    def write(self, outdir, prefix: str = "field") -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_field_csv(self.u, outdir / f"{prefix}_u.csv", "u")
        if self.v is not None:
            write_field_csv(self.v, outdir / f"{prefix}_v.csv", "v")


def _check_sign(sign: str) -> str:
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    return sign


def _solve(dop: DiscreteOperator, rhs: np.ndarray, guess: np.ndarray | None, tol: float = 1e-12) -> np.ndarray:
    """``F[w] = rhs`` with zero boundary values; returns nodal values."""
    grid = dop.grid
    f = np.zeros(grid.size)
    f[grid.interior] = rhs
    init = None if guess is None else Field(grid, guess)
    w, rep = solve_nonlinear(DirichletProblem(dop, Field(grid, f)), SolveOptions(tol=tol, initial=init))
    return w.values


def _shift_for(spec: OperatorSpec, weight: Field) -> float:
    grid = weight.grid
    pts = grid.points[grid.interior]
    z = zero_order_upper(spec, pts)
    if np.all(z <= 0):
        return 0.0
    w = weight.interior
    if np.any((z > 0) & (w <= 0)):
        raise ValueError("positive zero-order term outside the weight support")
    return float(max(1.0, np.max(z[z > 0] / w[z > 0])))


def _with_c_shift(spec: OperatorSpec, grid: Grid, delta: np.ndarray) -> OperatorSpec:
    c = sample_coef(spec.c, grid.points, 0) + delta
    return replace(spec, c=Field(grid, c))


def scalar_principal_eigen(
    spec: OperatorSpec,
    weight: Field,
    sign: str = "+",
    tol: float = 1e-8,
    max_iter: int = 500,
) -> EigenPair:
    """Inverse power iteration for ``F[u] + lambda weight u = 0`` on the cone of ``sign``.

    A nonproper operator is first shifted to ``F - s weight u`` (``s >= 1``); the
    reported eigenvalue is ``lambda0 - s``.
    """
    _check_sign(sign)
    grid = weight.grid
    w = weight.values
    if np.any(w < 0) or not np.any(weight.interior > 0):
        raise ValueError("weight must be nonnegative and not identically zero")
    op = reflect(spec) if sign == "-" else spec
    s = _shift_for(op, weight)
    if s:
        op = _with_c_shift(op, grid, -s * w)
    dop = discretize(op, grid)
    u = grid.distance_profile()
    u /= sup_norm(Field(grid, u))
    lam_prev, guess = np.inf, None
    res = np.inf
    for it in range(1, max_iter + 1):
        W = _solve(dop, -w[grid.interior] * u[grid.interior], guess)
        if np.any(W[grid.interior] <= 0):
            raise PositivityLossError("inverse iterate lost positivity")
        nrm = np.max(np.abs(W))
        lam = 1.0 / nrm
        guess = W
        u = W * lam
        scale = np.max(np.abs(w * u)) * lam
        res = float(np.max(np.abs(dop.residual_values(u) + lam * w[grid.interior] * u[grid.interior])) / scale)
        if res <= tol and abs(lam - lam_prev) <= 1e-10 * lam:
            break
        lam_prev = lam
    converged = res <= tol
    uf = Field(grid, -u if sign == "-" else u)
    return EigenPair(lam - s, uf, None, sign, res, it, (lam - s, lam - s), converged)


def abp_lower_bound(weight: Field, C_A: float) -> float:
    """``1 / (C_A ||weight||_{L^N}) - 1``; infinite for a vanishing weight."""
    if C_A <= 0:
        raise ValueError("C_A must be positive")
    nrm = lp_norm(weight, weight.grid.dim)
    return np.inf if nrm == 0 else 1.0 / (C_A * nrm) - 1.0


# --- systems ------------------------------------------------------------------------

def coupled_step(dop1: DiscreteOperator, dop2: DiscreteOperator, tau1: Field, tau2: Field, exps: ExponentPair, u, v, guess=None):
    """One un-normalized Jacobi step: ``F1[U] = -tau1 v^q``, ``F2[V] = -tau2 u^p``."""
    grid = dop1.grid
    I = grid.interior
    u = np.asarray(getattr(u, "values", u))
    v = np.asarray(getattr(v, "values", v))
    g1, g2 = (None, None) if guess is None else guess
    U = _solve(dop1, -tau1.values[I] * spow(v[I], exps.q), g1)
    V = _solve(dop2, -tau2.values[I] * spow(u[I], exps.p), g2)
    return U, V


def system_residual(dop1, dop2, tau1: Field, tau2: Field, exps: ExponentPair, u, v, lam: float, mu: float) -> float:
    """Relative residual of ``F1[u] + lam tau1 |v|^(q-1) v = 0`` and its partner."""
    I = dop1.grid.interior
    t1 = tau1.values[I] * spow(v[I], exps.q)
    t2 = tau2.values[I] * spow(u[I], exps.p)
    r1 = np.max(np.abs(dop1.residual_values(u) + lam * t1)) / max(np.max(np.abs(lam * t1)), 1e-300)
    r2 = np.max(np.abs(dop2.residual_values(v) + mu * t2)) / max(np.max(np.abs(mu * t2)), 1e-300)
    return float(max(r1, r2))


def _random_start(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    base = grid.distance_profile()
    bumps = np.ones(grid.size)
    for ax, (a, b) in enumerate(grid.extents):
        x = (grid.points[:, ax] - a) / (b - a)
        k = rng.integers(1, 4)
        bumps *= 1 + 0.5 * rng.random() * np.sin(k * np.pi * x) ** 2
    return base * bumps * (0.5 + rng.random())


def system_principal_eigen(
    F1: OperatorSpec,
    F2: OperatorSpec,
    tau1: Field,
    tau2: Field,
    exps: ExponentPair,
    sign: str = "+",
    tol: float = 1e-8,
    max_iter: int = 500,
    rng: np.random.Generator | None = None,
    init: tuple[Field, Field] | None = None,
) -> EigenPair:
    """Coupled inverse iteration for a positively homogeneous system with ``pq = 1``.

    Both components are sup-normalized independently; ``lambda_raw`` holds the
    two multipliers and ``lambda1 = (mu lambda^p)^(1/(p+1))``.  Fields are
    returned in the diagonal gauge where both equations share ``lambda1``.
    """
    _check_sign(sign)
    if exps.regime != "pq_equal_1":
        raise ValueError("system eigenvalues need pq = 1")
    grid = tau1.grid
    if tau2.grid != grid:
        raise GridMismatchError("weights on different grids")
    if np.any(tau1.values < 0) or np.any(tau2.values < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any((tau1.interior > 0) & (tau2.interior > 0)):
        raise ValueError("weight supports do not overlap")
    if sign == "-":
        F1, F2 = reflect(F1), reflect(F2)
    dop1, dop2 = discretize(F1, grid), discretize(F2, grid)
    I = grid.interior
    if init is not None:
        u, v = (np.abs(f.values) for f in init)
    elif rng is not None:
        u, v = _random_start(grid, rng), _random_start(grid, rng)
    else:
        u = v = grid.distance_profile()
    u, v = u / np.max(u), v / np.max(v)

    l1_prev, guess = np.inf, None
    res = np.inf
    lam = mu = l1 = np.nan
    for it in range(1, max_iter + 1):
        U, V = coupled_step(dop1, dop2, tau1, tau2, exps, u, v, guess)
        if np.any(U[I] <= 0) or np.any(V[I] <= 0):
            raise PositivityLossError("coupled iterate lost positivity")
        lam, mu = 1.0 / np.max(np.abs(U)), 1.0 / np.max(np.abs(V))
        guess = (U, V)
        u, v = U * lam, V * mu
        l1 = (mu * lam**exps.p) ** (1.0 / (exps.p + 1))
        res = system_residual(dop1, dop2, tau1, tau2, exps, u, v, lam, mu)
        if res <= tol and abs(l1 - l1_prev) <= 1e-10 * l1:
            break
        l1_prev = l1
    vd = (lam / l1) ** exps.p * v
    sgn = -1.0 if sign == "-" else 1.0
    return EigenPair(
        float(l1),
        Field(grid, sgn * u),
        Field(grid, sgn * vd),
        sign,
        res,
        it,
        (float(lam), float(mu)),
        res <= tol,
        float(np.max(np.abs(vd))),
    )


def gauge_distance(pair1: EigenPair, pair2: EigenPair, p: float) -> float:
    """Sup distance after moving ``pair2`` along its gauge orbit ``(t u, t^p v)`` onto ``pair1``."""
    if pair1.u.grid != pair2.u.grid:
        raise GridMismatchError("eigenpairs on different grids")
    if pair1.sign != pair2.sign:
        raise ValueError("eigenpairs on different sign branches")
    t = sup_norm(pair1.u) / sup_norm(pair2.u)
    d = sup_norm(pair1.u - pair2.u * t)
    if pair1.v is not None and pair2.v is not None:
        d = max(d, sup_norm(pair1.v - pair2.v * t**p))
    return d


# --- oracles -------------------------------------------------------------------------

def _shoot(exps: ExponentPair, lam: float, s: float, rtol: float = 1e-12):
    def rhs(_, y):
        u, du, v, dv = y
        return [du, -lam * spow(v, exps.q), dv, -lam * spow(u, exps.p)]

    sol = solve_ivp(rhs, (0.0, 1.0), [0.0, 1.0, 0.0, s], method="DOP853", rtol=rtol, atol=rtol)
    return sol.y[:, -1]


def shooting_oracle_1d(exps: ExponentPair, lam: float) -> float:
    """Boundary miss ``v(1)`` after tuning ``v'(0)`` so that ``u(1) = 0``.

    Integrates ``-u'' = lam |v|^(q-1) v``, ``-v'' = lam |u|^(p-1) u`` on (0, 1)
    with ``u(0) = v(0) = 0``, ``u'(0) = 1``.  Positive below the principal
    eigenvalue, negative just above it.
    """
    def u_end(s):
        return _shoot(exps, lam, s)[0]

    s_lo, s_hi = 0.0, 1e-6
    while u_end(s_hi) > 0:
        s_lo, s_hi = s_hi, s_hi * 4
        if s_hi > 1e12:
            return float(_shoot(exps, lam, s_lo)[2]) if s_lo else np.inf
    s = brentq(u_end, s_lo, s_hi, xtol=1e-14, rtol=1e-13)
    return float(_shoot(exps, lam, s)[2])


def shooting_eigenvalue(exps: ExponentPair, lam_lo: float = 1.0, lam_hi: float | None = None) -> float:
    """Principal eigenvalue of the 1D Laplacian system by shooting on ``lambda``."""
    if shooting_oracle_1d(exps, lam_lo) <= 0:
        raise ValueError("lower bracket is not below the principal eigenvalue")
    hi = lam_hi or lam_lo * 1.5
    while shooting_oracle_1d(exps, hi) > 0:
        lam_lo, hi = hi, hi * 1.5
        if hi > 1e6:
            raise ValueError("failed to bracket the principal eigenvalue")
    return float(brentq(lambda l: shooting_oracle_1d(exps, l), lam_lo, hi, xtol=1e-12, rtol=1e-12))


def second_eigen_linear_symmetric(L, tau: Field, grid: Grid | None = None) -> float:
    """Second smallest eigenvalue of ``-L[w] = lambda tau w`` for a symmetric linear ``L``."""
    grid = grid or tau.grid
    if tau.grid != grid:
        raise GridMismatchError("weight on a different grid")
    if isinstance(L, OperatorSpec):
        if L.kind != "linear" or not _trivially_linear(L):
            raise ValueError("second eigenvalue is only available for linear operators")
        L = L.members[0]
    dop = discretize(OperatorSpec("linear", (L,)), grid)
    J, _, _ = dop.linearize(np.zeros(grid.size))
    A = -sp.csc_matrix(J[:, grid.interior])
    if abs(A - A.T).max() > 1e-9 * abs(A).max():
        raise ValueError("discrete operator is not symmetric")
    t = tau.interior
    if np.any(t < 0) or not np.any(t > 0):
        raise ValueError("weight must be nonnegative and nonzero")
    lu = spla.splu(A)
    op = spla.LinearOperator(A.shape, matvec=lambda x: lu.solve(t * x), dtype=float)
    vals = spla.eigs(op, k=3, which="LM", return_eigenvectors=False, tol=1e-12)
    lams = np.sort(1.0 / np.real(vals[np.abs(vals) > 0]))
    return float(lams[1])


def _trivially_linear(spec: OperatorSpec) -> bool:
    zero = lambda c: not callable(c) and not isinstance(c, Field) and not np.any(c)
    return zero(spec.gamma) and zero(spec.theta)
