"""Scalar Dirichlet solves: frozen linear systems, policy iteration, ABP audit."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Field, Grid, GridMismatchError, lp_norm
from .operators import (
    DiscreteOperator,
    EllipticityPair,
    LinearOpSpec,
    OperatorSpec,
    discretize,
    is_proper,
    pucci_plus_op,
    sample_coef,
    zero_order_upper,
)


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class DirichletProblem:
    """``F[u] = f`` inside, ``u = boundary`` on the boundary nodes."""

    dop: DiscreteOperator
    f: Field
    boundary: Field | None = None

    def __post_init__(self):
        g = self.dop.grid
        if self.f.grid != g or (self.boundary is not None and self.boundary.grid != g):
            raise GridMismatchError("problem data on a different grid than the operator")

    @property
    def boundary_values(self) -> np.ndarray:
        if self.boundary is None:
            return np.zeros(self.dop.grid.boundary.size)
        return self.boundary.on_boundary


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 200
    omega: float = 0.5
    cycle_window: int = 10
    initial: Field | None = None


@dataclass
class SolveReport:
    iterations: int
    residual: float
    policy_switches: int
    converged: bool
    method: str = "policy"

    def to_json(self) -> dict:
        return asdict(self)


def frozen_solve(J: sp.spmatrix, grid: Grid, rhs: np.ndarray, g: np.ndarray | None = None) -> np.ndarray:
    """Solve ``J u = rhs`` on interior rows with ``u = g`` on the boundary; returns all nodes."""
    J = sp.csr_matrix(J)
    inter, bnd = grid.interior, grid.boundary
    u = np.zeros(grid.size)
    if g is not None:
        u[bnd] = g
    b = rhs - J[:, bnd] @ u[bnd]
    try:
        lu = spla.splu(sp.csc_matrix(J[:, inter]))
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from None
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("frozen system produced non-finite values")
    u[inter] = x
    return u


def _as_operator(op) -> OperatorSpec:
    if isinstance(op, LinearOpSpec):
        return OperatorSpec("linear", (op,))
    if isinstance(op, OperatorSpec) and op.kind == "linear":
        return op
    raise TypeError("solve_linear needs a linear operator")


def solve_linear(op, grid: Grid, f: Field, boundary: Field | None = None) -> Field:
    """Direct sparse solve of a linear Dirichlet problem ``L[u] = f``."""
    dop = discretize(_as_operator(op), grid)
    J, _, _ = dop.linearize(np.zeros(grid.size))
    g = None if boundary is None else boundary.on_boundary
    return Field(grid, frozen_solve(J, grid, f.interior, g))


def _signature(codes) -> bytes:
    return b"|".join(np.ascontiguousarray(c).tobytes() for c in codes)


def _scaled_residual(val: np.ndarray, f: np.ndarray) -> float:
    return float(np.max(np.abs(val - f), initial=0.0) / (1.0 + np.max(np.abs(f), initial=0.0)))


def _policy_iteration(dop: DiscreteOperator, f: np.ndarray, g: np.ndarray, u: np.ndarray, opts: SolveOptions):
    grid = dop.grid
    recent: deque[bytes] = deque(maxlen=opts.cycle_window)
    switches, method = 0, "policy"
    prev = None
    res = np.inf
    for it in range(opts.max_iter + 1):
        J, val, codes = dop.linearize(u)
        res = _scaled_residual(val, f)
        if res <= opts.tol:
            return u, SolveReport(it, res, switches, True, method)
        if it == opts.max_iter:
            break
        sig = _signature(codes)
        if method == "policy" and sig == prev:
            # stable policy: the last frozen solve is already exact up to roundoff
            return u, SolveReport(it, res, switches, res <= opts.tol, method)
        if prev is not None and sig != prev:
            switches += 1
            if method == "policy" and sig in recent:
                method = "picard"
        recent.append(sig)
        prev = sig
        new = frozen_solve(J, grid, f, g)
        u = new if method == "policy" else u + opts.omega * (new - u)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError("non-finite iterate in nonlinear solve")
    return u, SolveReport(opts.max_iter, res, switches, False, method)


def solve_nonlinear(problem: DirichletProblem, opts: SolveOptions | None = None) -> tuple[Field, SolveReport]:
    """Policy iteration (Newton on the piecewise-linear scheme) with damped fallback.

    Operators with a positive zero-order part are shifted to a proper one and
    the removed term is lagged in an outer source iteration.
    """
    opts = opts or SolveOptions()
    dop, grid = problem.dop, problem.dop.grid
    f = problem.f.interior
    g = problem.boundary_values
    if not np.any(f) and not np.any(g):
        return Field.zeros(grid), SolveReport(0, 0.0, 0, True, "policy")
    u = np.zeros(grid.size)
    u[grid.boundary] = g
    if opts.initial is not None:
        u[grid.interior] = opts.initial.interior
    pts = grid.points[grid.interior]
    if is_proper(dop.spec, pts):
        u, rep = _policy_iteration(dop, f, g, u, opts)
        return Field(grid, u), rep

    shift = np.maximum(zero_order_upper(dop.spec, pts), 0.0)
    shifted = discretize(replace(dop.spec, c=_shifted_c(dop.spec, grid, shift)), grid)
    inner = replace(opts, tol=opts.tol / 100)
    total, switches = 0, 0
    res = np.inf
    for outer in range(opts.max_iter):
        u, rep = _policy_iteration(shifted, f - shift * u[grid.interior], g, u, inner)
        total += rep.iterations
        switches += rep.policy_switches
        res = _scaled_residual(dop.residual_values(u), f)
        if res <= opts.tol:
            return Field(grid, u), SolveReport(total, res, switches, True, rep.method)
        if not np.isfinite(res):
            raise FloatingPointError("source iteration diverged")
    return Field(grid, u), SolveReport(total, res, switches, False, "policy")


def _shifted_c(spec: OperatorSpec, grid: Grid, shift: np.ndarray) -> Field:
    c = sample_coef(spec.c, grid.points, 0).copy()
    c[grid.interior] -= shift
    return Field(grid, c)


def abp_audit(u: Field, f: Field, gamma=0.0, e: EllipticityPair = EllipticityPair(1.0, 1.0), tol: float = 1e-8) -> dict:
    """Empirical ABP constant: ``max u <= max_bdry u+ + C ||f-||_{L^N}``.

    ``u`` must satisfy ``M+[u] + gamma|Du| >= f`` discretely; this is checked.
    """
    if u.grid != f.grid:
        raise GridMismatchError("u and f on different grids")
    grid = u.grid
    dop = discretize(pucci_plus_op(e.alpha, e.beta, gamma=gamma), grid)
    Lu = dop.residual_values(u.values)
    fi = f.interior
    if np.any(Lu < fi - tol * (1 + np.max(np.abs(fi)))):
        raise ValueError("u is not a discrete subsolution of the extremal operator")
    lhs = float(np.max(u.values))
    bdry = float(np.max(np.maximum(u.on_boundary, 0.0)))
    fneg = Field(grid, np.maximum(-f.values, 0.0))
    norm = lp_norm(fneg, grid.dim)
    rhs = bdry + norm
    ratio = 0.0 if lhs <= 0 or norm == 0 else max(lhs - bdry, 0.0) / norm
    return {"lhs": lhs, "rhs_norm": rhs, "ratio": ratio}
