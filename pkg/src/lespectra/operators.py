"""Fully nonlinear elliptic operators: specs, pointwise evaluation, discretization.

Every built-in operator is piecewise linear and positively 1-homogeneous in
``(r, xi, X)``, so at any argument it coincides with one *active* linear
member.  The evaluation kernel returns both the value and the weights of that
member on the jet ingredients ``(r, D+u, D-u, D^2u)``; the nonlinear solvers
are built on those weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .geometry import Field, Grid, GridMismatchError

Coef = Any  # float | array-like constant | callable(points) | Field

KINDS = ("linear", "pucci_plus", "pucci_minus", "max", "min", "inf_sup", "sup_inf")
_REFLECTED_KIND = {
    "linear": "linear",
    "pucci_plus": "pucci_minus",
    "pucci_minus": "pucci_plus",
    "max": "min",
    "min": "max",
    "inf_sup": "sup_inf",
    "sup_inf": "inf_sup",
}


@dataclass(frozen=True)
class EllipticityPair:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta >= self.alpha):
            raise ValueError(f"need 0 < alpha <= beta, got ({self.alpha}, {self.beta})")


@dataclass(frozen=True)
class LinearOpSpec:
    """``tr(A D^2u) + b . Du + c u``; ``A`` may be a scalar (times identity)."""

    A: Coef = 1.0
    drift: Coef = 0.0
    c: Coef = 0.0


@dataclass(frozen=True)
class OperatorSpec:
    """Core kind plus extra ``sign*gamma|Du|``, ``sign*theta|u|`` and ``c u`` terms.

    ``members`` is a tuple of :class:`LinearOpSpec` for ``linear``/``max``/``min``
    and a tuple of tuples (outer index s, inner index t) for ``inf_sup`` /
    ``sup_inf``.  ``inf_sup`` means ``min_s max_t L_st``.
    """

    kind: str
    members: tuple = ()
    ellipticity: EllipticityPair | None = None
    gamma: Coef = 0.0
    gamma_sign: int = 1
    theta: Coef = 0.0
    theta_sign: int = 1
    c: Coef = 0.0
    reflected: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind.startswith("pucci"):
            if self.ellipticity is None:
                raise ValueError("Pucci operators need an EllipticityPair")
        elif not self.members:
            raise ValueError(f"empty family for kind {self.kind!r}")
        if self.kind == "linear" and len(self.members) != 1:
            raise ValueError("linear operators have exactly one member")
        if self.kind in ("inf_sup", "sup_inf"):
            rows = [len(r) for r in self.members]
            if min(rows) == 0 or len(set(rows)) != 1:
                raise ValueError("inf_sup/sup_inf need a rectangular non-empty family")
        if self.gamma_sign not in (1, -1) or self.theta_sign not in (1, -1):
            raise ValueError("signs must be +1 or -1")

    def flat_members(self) -> list[LinearOpSpec]:
        if self.kind in ("inf_sup", "sup_inf"):
            return [m for row in self.members for m in row]
        return list(self.members)

    def with_terms(self, **kw) -> OperatorSpec:
        return replace(self, **kw)


# --- constructors -----------------------------------------------------------

def laplacian(scale: float = 1.0) -> OperatorSpec:
    return OperatorSpec("linear", (LinearOpSpec(A=scale),))


def linear(A: Coef = 1.0, drift: Coef = 0.0, c: Coef = 0.0, **extra) -> OperatorSpec:
    return OperatorSpec("linear", (LinearOpSpec(A, drift, c),), **extra)


def pucci_plus_op(alpha: float, beta: float, **extra) -> OperatorSpec:
    return OperatorSpec("pucci_plus", ellipticity=EllipticityPair(alpha, beta), **extra)


def pucci_minus_op(alpha: float, beta: float, **extra) -> OperatorSpec:
    return OperatorSpec("pucci_minus", ellipticity=EllipticityPair(alpha, beta), **extra)


def max_of(members: Sequence[LinearOpSpec], **extra) -> OperatorSpec:
    return OperatorSpec("max", tuple(members), **extra)


def min_of(members: Sequence[LinearOpSpec], **extra) -> OperatorSpec:
    return OperatorSpec("min", tuple(members), **extra)


def inf_sup(family: Sequence[Sequence[LinearOpSpec]], **extra) -> OperatorSpec:
    return OperatorSpec("inf_sup", tuple(tuple(r) for r in family), **extra)


def sup_inf(family: Sequence[Sequence[LinearOpSpec]], **extra) -> OperatorSpec:
    return OperatorSpec("sup_inf", tuple(tuple(r) for r in family), **extra)


def fucik_pair(kappa: float, base: LinearOpSpec | None = None) -> tuple[OperatorSpec, OperatorSpec]:
    """``(max{L, kappa L}, min{L, kappa L})`` for a linear base operator ``L``."""
    L = base or LinearOpSpec()
    kL = LinearOpSpec(_scaled(L.A, kappa), _scaled(L.drift, kappa), _scaled(L.c, kappa))
    return max_of([L, kL]), min_of([L, kL])


def _scaled(coef: Coef, k: float) -> Coef:
    if callable(coef):
        return lambda pts, _f=coef: k * np.asarray(_f(pts))
    if isinstance(coef, Field):
        return coef * k
    return k * np.asarray(coef, dtype=float)


# --- Pucci extremal operators -----------------------------------------------

def sym_eig2(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigen-decomposition of a batch of symmetric matrices (dim <= 2).

    Returns eigenvalues ``(M, d)`` (descending) and eigenvectors ``(M, d, d)``
    with columns matching the eigenvalues.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[-1]
    if d == 1:
        ev = X[..., 0, :].copy()
        vec = np.ones(X.shape)
        return ev, vec
    if d != 2:
        raise ValueError("only dimensions 1 and 2 are supported")
    a, b, c = X[..., 0, 0], X[..., 0, 1], X[..., 1, 1]
    m = (a + c) / 2
    rad = np.hypot((a - c) / 2, b)
    ev = np.stack([m + rad, m - rad], axis=-1)
    th = 0.5 * np.arctan2(2 * b, a - c)
    ct, st = np.cos(th), np.sin(th)
    vec = np.empty(X.shape)
    vec[..., 0, 0], vec[..., 1, 0] = ct, st
    vec[..., 0, 1], vec[..., 1, 1] = -st, ct
    return ev, vec


def _check_symmetric(X: np.ndarray) -> None:
    if X.shape[-1] != X.shape[-2]:
        raise ValueError("Hessian must be square")
    scale = np.max(np.abs(X)) if X.size else 0.0
    if np.any(np.abs(X - np.swapaxes(X, -1, -2)) > 1e-12 * max(scale, 1.0)):
        raise ValueError("Hessian must be symmetric")


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    return X


def _pucci_plus_values(X, alpha, beta):
    ev, _ = sym_eig2(X)
    return np.sum(beta[..., None] * np.maximum(ev, 0) + alpha[..., None] * np.minimum(ev, 0), axis=-1)


def pucci_plus(X, e: EllipticityPair):
    """``sup tr(AX)`` over ``alpha I <= A <= beta I``."""
    X = _as_matrix(X)
    _check_symmetric(X)
    lead = X.shape[:-2]
    out = _pucci_plus_values(X, np.full(lead, e.alpha), np.full(lead, e.beta))
    return float(out) if out.ndim == 0 else out


def pucci_minus(X, e: EllipticityPair):
    """``inf tr(AX)`` over ``alpha I <= A <= beta I``, i.e. ``-pucci_plus(-X)``."""
    X = _as_matrix(X)
    return -pucci_plus(-X, e)


# --- coefficient sampling -----------------------------------------------------

def _field_lookup(fld: Field, pts: np.ndarray) -> np.ndarray:
    g = fld.grid
    idx = []
    for ax, ((a, _), hk) in enumerate(zip(g.extents, g.h)):
        t = (pts[:, ax] - a) / hk
        i = np.rint(t).astype(int)
        if np.any(np.abs(t - i) > 1e-7) or np.any(i < 0) or np.any(i >= g.shape[ax]):
            raise GridMismatchError("coefficient field sampled off its grid")
        idx.append(i)
    return fld.values[np.ravel_multi_index(tuple(idx), g.shape)]


def sample_coef(coef: Coef, pts: np.ndarray, rank: int) -> np.ndarray:
    """Sample a coefficient at points ``(M, d)`` as a rank-0/1/2 tensor per point."""
    M, d = pts.shape
    target = (M,) + (d,) * rank
    if isinstance(coef, Field):
        vals = _field_lookup(coef, pts)
    elif callable(coef):
        vals = np.asarray(coef(pts), dtype=float)
    else:
        vals = np.asarray(coef, dtype=float)
    if rank == 2 and vals.shape in ((), (M,)):
        vals = vals.reshape(vals.shape + (1, 1)) * np.eye(d)
    elif rank == 1 and vals.shape == (M,) and d > 1:
        vals = np.repeat(vals[:, None], d, axis=1)
    return np.broadcast_to(vals, target).astype(float)


class _Member(NamedTuple):
    A: np.ndarray  # (M, d, d)
    b: np.ndarray  # (M, d)
    c: np.ndarray  # (M,)


@dataclass
class _Sampled:
    kind: str
    members: list
    shape: tuple
    alpha: np.ndarray | None
    beta: np.ndarray | None
    gamma: np.ndarray
    gamma_sign: int
    theta: np.ndarray
    theta_sign: int
    c: np.ndarray


def _sample(spec: OperatorSpec, pts: np.ndarray) -> _Sampled:
    M = pts.shape[0]
    members = []
    for m in spec.flat_members():
        A = sample_coef(m.A, pts, 2)
        if np.any(np.abs(A - np.swapaxes(A, -1, -2)) > 1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("diffusion matrices must be symmetric")
        members.append(_Member(A, sample_coef(m.drift, pts, 1), sample_coef(m.c, pts, 0)))
    if spec.kind in ("inf_sup", "sup_inf"):
        shape = (len(spec.members), len(spec.members[0]))
    else:
        shape = (len(members),)
    e = spec.ellipticity
    if e is not None and members:
        for m in members:
            ev, _ = sym_eig2(m.A)
            if np.any(ev < e.alpha * (1 - 1e-12)) or np.any(ev > e.beta * (1 + 1e-12)):
                raise ValueError("family member violates the declared ellipticity bounds")
    gamma = sample_coef(spec.gamma, pts, 0)
    theta = sample_coef(spec.theta, pts, 0)
    if np.any(gamma < 0) or np.any(theta < 0):
        raise ValueError("gamma and theta must be nonnegative")
    return _Sampled(
        spec.kind,
        members,
        shape,
        None if e is None else np.full(M, e.alpha),
        None if e is None else np.full(M, e.beta),
        gamma,
        spec.gamma_sign,
        theta,
        spec.theta_sign,
        sample_coef(spec.c, pts, 0),
    )


# --- evaluation kernel ---------------------------------------------------------

class Weights(NamedTuple):
    """Coefficients of the active linear member on the jet ingredients."""

    r: np.ndarray  # (M,)
    gp: np.ndarray  # (M, d) forward differences
    gm: np.ndarray  # (M, d) backward differences
    X: np.ndarray  # (M, d, d) Hessian entries


def _member_jet(m: _Member, r, gp, gm, X):
    bp, bm = np.maximum(m.b, 0.0), np.minimum(m.b, 0.0)
    val = np.einsum("mij,mij->m", m.A, X) + np.sum(bp * gp + bm * gm, axis=-1) + m.c * r
    return val, Weights(m.c, bp, bm, m.A)


def _gather(ws: list[Weights], idx: np.ndarray) -> Weights:
    rows = np.arange(idx.size)
    return Weights(*(np.stack(parts)[idx, rows] for parts in zip(*ws)))


def _kernel(s: _Sampled, r, gp, gm, X):
    M, d = gp.shape
    codes = []
    if s.kind.startswith("pucci"):
        ev, vec = sym_eig2(X)
        hi, lo = (s.beta, s.alpha) if s.kind == "pucci_plus" else (s.alpha, s.beta)
        pos = ev > 0
        coef = np.where(pos, hi[:, None], lo[:, None])
        val = np.sum(coef * ev, axis=-1)
        A = np.einsum("mik,mk,mjk->mij", vec, coef, vec)
        w = Weights(np.zeros(M), np.zeros((M, d)), np.zeros((M, d)), A)
        codes.append(pos.astype(np.int8))
    else:
        vals, ws = zip(*(_member_jet(m, r, gp, gm, X) for m in s.members))
        vals = np.stack(vals)
        if s.kind == "linear":
            val, w = vals[0], ws[0]
        elif s.kind in ("max", "min"):
            k = np.argmax(vals, axis=0) if s.kind == "max" else np.argmin(vals, axis=0)
            val, w = vals[k, np.arange(M)], _gather(list(ws), k)
            codes.append(k)
        else:
            S, T = s.shape
            v3 = vals.reshape(S, T, M)
            inner = np.argmax(v3, axis=1) if s.kind == "inf_sup" else np.argmin(v3, axis=1)
            iv = np.take_along_axis(v3, inner[:, None, :], axis=1)[:, 0, :]
            outer = np.argmin(iv, axis=0) if s.kind == "inf_sup" else np.argmax(iv, axis=0)
            t = inner[outer, np.arange(M)]
            k = outer * T + t
            val, w = iv[outer, np.arange(M)], _gather(list(ws), k)
            codes.append(k)
    wr, wgp, wgm, wX = (np.array(a, dtype=float, copy=True) for a in w)
    # extra drift sign*gamma*|Du| with per-axis upwinding
    if np.any(s.gamma):
        if s.gamma_sign > 0:
            cand = np.stack([gp, -gm, np.zeros_like(gp)])
        else:
            cand = np.stack([gm, -gp, np.zeros_like(gp)])
        ch = np.argmax(cand, axis=0)
        a = np.take_along_axis(cand, ch[None], axis=0)[0]
        mag = np.sqrt(np.sum(a * a, axis=-1))
        val = val + s.gamma_sign * s.gamma * mag
        unit = np.divide(a, mag[:, None], out=np.zeros_like(a), where=mag[:, None] > 0)
        g = (s.gamma * s.gamma_sign)[:, None] * unit
        if s.gamma_sign > 0:
            wgp += np.where(ch == 0, g, 0.0)
            wgm -= np.where(ch == 1, g, 0.0)
        else:
            wgm += np.where(ch == 0, g, 0.0)
            wgp -= np.where(ch == 1, g, 0.0)
        codes.append(ch.astype(np.int8))
    if np.any(s.theta):
        sg = np.where(r >= 0, 1.0, -1.0)
        val = val + s.theta_sign * s.theta * np.abs(r)
        wr += s.theta_sign * s.theta * sg
        codes.append((sg > 0).astype(np.int8))
    if np.any(s.c):
        val = val + s.c * r
        wr += s.c
    return val, Weights(wr, wgp, wgm, wX), codes


def _batch(spec, x, r, xi, X):
    X = _as_matrix(X)
    single = X.ndim == 2
    X = np.atleast_3d(X) if X.ndim == 2 else X
    if single:
        X = X.reshape((1,) + X.shape[-2:])
    _check_symmetric(X)
    M, d = X.shape[0], X.shape[-1]
    x = np.asarray(x, dtype=float).reshape(-1, d)
    xi = np.asarray(xi, dtype=float).reshape(-1, d)
    r = np.asarray(r, dtype=float).reshape(-1)
    M = max(M, x.shape[0], xi.shape[0], r.shape[0])
    x = np.broadcast_to(x, (M, d))
    xi = np.broadcast_to(xi, (M, d))
    r = np.broadcast_to(r, (M,))
    X = np.broadcast_to(X, (M, d, d))
    return single and M == 1, x, r, xi, X


def evaluate(spec: OperatorSpec, x, r, xi, X):
    """Pointwise ``F(x, r, xi, X)``; accepts single arguments or batches."""
    single, x, r, xi, X = _batch(spec, x, r, xi, X)
    val, _, _ = _kernel(_sample(spec, x), r, xi, xi, X)
    return float(val[0]) if single else val


def active_weights(spec: OperatorSpec, x, r, xi, X) -> Weights:
    _, x, r, xi, X = _batch(spec, x, r, xi, X)
    return _kernel(_sample(spec, x), r, xi, xi, X)[1]


# --- reflection, envelopes, structure bounds --------------------------------------

def reflect(spec: OperatorSpec) -> OperatorSpec:
    """``G(x, r, p, X) = -F(x, -r, -p, -X)``."""
    return replace(
        spec,
        kind=_REFLECTED_KIND[spec.kind],
        gamma_sign=-spec.gamma_sign,
        theta_sign=-spec.theta_sign,
        reflected=not spec.reflected,
    )


def _is_zero(coef: Coef) -> bool:
    if callable(coef) or isinstance(coef, Field):
        return False
    return not np.any(np.asarray(coef, dtype=float))


def _envelope(spec: OperatorSpec, upper: bool) -> OperatorSpec:
    sgn = 1 if upper else -1
    kind = spec.kind
    members = spec.members
    if kind.startswith("pucci"):
        kind = "pucci_plus" if upper else "pucci_minus"
    elif kind in ("max", "min"):
        kind = "max" if upper else "min"
    elif kind in ("inf_sup", "sup_inf"):
        kind = "max" if upper else "min"
        members = tuple(spec.flat_members())
    gs = spec.gamma_sign if _is_zero(spec.gamma) else sgn
    ts = spec.theta_sign if _is_zero(spec.theta) else sgn
    return replace(spec, kind=kind, members=members, gamma_sign=gs, theta_sign=ts)


def upper_envelope(spec: OperatorSpec) -> OperatorSpec:
    """Convex operator above ``spec``; exact unless :func:`envelope_is_exact` says otherwise."""
    return _envelope(spec, True)


def lower_envelope(spec: OperatorSpec) -> OperatorSpec:
    return _envelope(spec, False)


def envelope_is_exact(spec: OperatorSpec, upper: bool = True) -> bool:
    """Whether the returned envelope equals ``F*`` (``F_*``) rather than bounding it."""
    if spec.kind in ("inf_sup", "sup_inf"):
        return False
    if spec.kind == "linear":
        return True
    want = 1 if upper else -1
    extras_ok = (_is_zero(spec.gamma) or spec.gamma_sign == want) and (
        _is_zero(spec.theta) or spec.theta_sign == want
    )
    core_same = spec.kind in (("pucci_plus", "max") if upper else ("pucci_minus", "min"))
    if core_same:
        return extras_ok
    # opposite-curvature core: only exact when the extras vanish
    return _is_zero(spec.gamma) and _is_zero(spec.theta)


class StructureBounds(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray


def structure_bounds(spec: OperatorSpec, pts) -> StructureBounds:
    """Pointwise constants of the extremal operators ``L^+-`` bounding ``spec``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    s = _sample(spec, pts)
    M = pts.shape[0]
    if s.members:
        evs = [sym_eig2(m.A)[0] for m in s.members]
        alpha = np.min([e.min(axis=-1) for e in evs], axis=0)
        beta = np.max([e.max(axis=-1) for e in evs], axis=0)
        gamma = np.max([np.linalg.norm(m.b, axis=-1) for m in s.members], axis=0)
        theta = np.max([np.abs(m.c) for m in s.members], axis=0)
        if s.alpha is not None:
            alpha, beta = np.minimum(alpha, s.alpha), np.maximum(beta, s.beta)
    else:
        alpha, beta = s.alpha, s.beta
        gamma = theta = np.zeros(M)
    return StructureBounds(alpha, beta, gamma + s.gamma, theta + s.theta + np.abs(s.c))


def extremal_value(b: StructureBounds, sign: int, r, xi, X) -> np.ndarray:
    """``L^+`` (sign=+1) or ``L^-`` (sign=-1) evaluated with the given bounds."""
    X = _as_matrix(X)
    xi = np.asarray(xi, dtype=float)
    if sign > 0:
        m = _pucci_plus_values(X, b.alpha, b.beta)
    else:
        m = -_pucci_plus_values(-X, b.alpha, b.beta)
    return m + sign * b.gamma * np.linalg.norm(xi, axis=-1) + sign * b.theta * np.abs(r)


def zero_order_upper(spec: OperatorSpec, pts) -> np.ndarray:
    """Largest coefficient multiplying ``u`` on the positive cone, per point."""
    s = _sample(spec, np.atleast_2d(pts))
    z = s.c + s.theta_sign * s.theta
    if s.members:
        z = z + np.max([m.c for m in s.members], axis=0)
    return z


def is_proper(spec: OperatorSpec, pts) -> bool:
    """Nonincreasing in ``u`` at every point (checked on both cones)."""
    s = _sample(spec, np.atleast_2d(pts))
    worst = s.c + s.theta
    if s.members:
        worst = worst + np.max([m.c for m in s.members], axis=0)
    return bool(np.all(worst <= 0))


# --- discretization -----------------------------------------------------------------

def _stencils(grid: Grid):
    """Sparse difference matrices, rows = interior nodes, columns = all nodes."""
    shape = grid.shape
    inter = grid.interior
    mi = np.array(np.unravel_index(inter, shape))
    nI, N = inter.size, grid.size
    rows = np.arange(nI)

    def shift(offsets):
        return np.ravel_multi_index(tuple(mi[a] + offsets[a] for a in range(grid.dim)), shape)

    def mat(entries):
        r, c, v = [], [], []
        for off, coef in entries:
            r.append(rows)
            c.append(shift(off))
            v.append(np.full(nI, coef))
        return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(nI, N))

    d = grid.dim
    zero = (0,) * d
    R = mat([(zero, 1.0)])
    Gp, Gm, D = [], [], {}
    for a in range(d):
        e = tuple(1 if k == a else 0 for k in range(d))
        me = tuple(-x for x in e)
        ha = grid.h[a]
        Gp.append(mat([(e, 1 / ha), (zero, -1 / ha)]))
        Gm.append(mat([(zero, 1 / ha), (me, -1 / ha)]))
        D[a, a] = mat([(e, 1 / ha**2), (zero, -2 / ha**2), (me, 1 / ha**2)])
    if d == 2:
        q = 1 / (4 * grid.h[0] * grid.h[1])
        D[0, 1] = mat([((1, 1), q), ((1, -1), -q), ((-1, 1), -q), ((-1, -1), q)])
    return R, Gp, Gm, D


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    spec: OperatorSpec

    @cached_property
    def _stencils(self):
        return _stencils(self.grid)

    @cached_property
    def sampled(self) -> _Sampled:
        return _sample(self.spec, self.grid.points[self.grid.interior])

    @cached_property
    def monotone(self) -> bool:
        """False where the 2D Hessian-eigen evaluation may break monotonicity."""
        if self.grid.dim == 1:
            return True
        if self.spec.kind.startswith("pucci"):
            return False
        return all(np.allclose(m.A[:, 0, 1], 0.0) for m in self.sampled.members)

    def jet(self, u: np.ndarray):
        R, Gp, Gm, D = self._stencils
        d = self.grid.dim
        r = R @ u
        gp = np.stack([G @ u for G in Gp], axis=-1)
        gm = np.stack([G @ u for G in Gm], axis=-1)
        X = np.empty((r.size, d, d))
        for a in range(d):
            X[:, a, a] = D[a, a] @ u
        if d == 2:
            X[:, 0, 1] = X[:, 1, 0] = D[0, 1] @ u
        return r, gp, gm, X

    def residual_values(self, u: np.ndarray) -> np.ndarray:
        """``F[u]`` at interior nodes."""
        return _kernel(self.sampled, *self.jet(u))[0]

    @cached_property
    def _plan(self):
        """Stacked COO pattern of all stencils, in the order of :meth:`_weight_rows`."""
        R, Gp, Gm, D = self._stencils
        mats = [R]
        for a in range(self.grid.dim):
            mats += [Gp[a], Gm[a], D[a, a]]
        if self.grid.dim == 2:
            mats.append(D[0, 1])
        coo = [m.tocoo() for m in mats]
        rows = np.concatenate([c.row for c in coo])
        cols = np.concatenate([c.col for c in coo])
        vals = np.concatenate([c.data for c in coo])
        which = np.concatenate([np.full(c.nnz, k) for k, c in enumerate(coo)])
        return rows, cols, vals, which

    def _weight_rows(self, w: Weights) -> np.ndarray:
        rows = [w.r]
        for a in range(self.grid.dim):
            rows += [w.gp[:, a], w.gm[:, a], w.X[:, a, a]]
        if self.grid.dim == 2:
            rows.append(w.X[:, 0, 1] + w.X[:, 1, 0])
        return np.stack(rows)

    def linearize(self, u: np.ndarray):
        """Active linear member at ``u``: sparse matrix (interior x all), value, policy codes.

        The operator is piecewise linear, so ``J @ u`` reproduces ``F[u]``.
        """
        val, w, codes = _kernel(self.sampled, *self.jet(u))
        rows, cols, vals, which = self._plan
        data = vals * self._weight_rows(w)[which, rows]
        J = sp.csr_matrix((data, (rows, cols)), shape=(self.grid.interior.size, self.grid.size))
        return J, val, codes


def discretize(spec: OperatorSpec, grid: Grid) -> DiscreteOperator:
    if grid.dim not in (1, 2):
        raise ValueError("only 1D and 2D grids are supported")
    dop = DiscreteOperator(grid, spec)
    dop.sampled  # validate coefficients against the grid now
    return dop


def apply(dop: DiscreteOperator, u: Field, boundary: Field | None = None) -> Field:
    """Residual field: ``F[u]`` inside, ``u - boundary`` on boundary nodes."""
    if u.grid != dop.grid:
        raise GridMismatchError("field and operator live on different grids")
    out = np.array(u.values, copy=True)
    if boundary is not None:
        if boundary.grid != dop.grid:
            raise GridMismatchError("boundary data on a different grid")
        out[dop.grid.boundary] -= boundary.values[dop.grid.boundary]
    out[dop.grid.interior] = dop.residual_values(u.values)
    return Field(dop.grid, out)
