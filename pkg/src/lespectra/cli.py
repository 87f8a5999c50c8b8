"""Config-driven batch runs: ``lespectra <task> --config <file> [--out <dir>] [--seed <u64>]``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from .curves import SpectralCurve, classify, write_curves_csv
from .dirichlet import (
    SystemProblem,
    amp_scan,
    build_witness_bank,
    isolation_scan,
    mp_survey,
    small_domain_threshold,
    solve_sublinear,
    solve_system_monotone_signed,
    solve_system_picard,
)
from .eigen import (
    EigenConvergenceError,
    ExponentPair,
    PositivityLossError,
    abp_lower_bound,
    scalar_principal_eigen,
    system_principal_eigen,
)
from .geometry import Field, Grid, make_uniform_grid, write_field_csv
from .operators import (
    EllipticityPair,
    LinearOpSpec,
    OperatorSpec,
    discretize,
    fucik_pair,
    laplacian,
    structure_bounds,
)
from .solve import DirichletProblem, SingularSystemError, abp_audit, solve_nonlinear

TASKS = ("eigen", "curve", "solve", "mp-check", "amp-scan", "small-domain", "isolation", "verify-fucik", "verify-scalar")

TOP_KEYS = {"task", "grid", "operators", "weights", "exponents", "parameters", "data", "tolerances", "output", "seed"}
BLOCK_KEYS = {
    "grid": {"extents", "n"},
    "operators": {"F1", "F2"},
    "weights": {"tau1", "tau2", "theta"},
    "exponents": {"p", "q"},
    "parameters": {
        "lambda", "mu", "sign", "kappa", "lambda_min", "lambda_max", "n_samples", "lambdas", "mus",
        "offsets", "L_max", "battery", "cap", "weight_length", "sweeps", "starts", "method", "n",
    },
    "data": {"f1", "f2"},
    "tolerances": {"eigen", "solve"},
    "output": {"dir"},
}
OPERATOR_KEYS = {"kind", "A", "drift", "c", "members", "family", "ellipticity", "gamma", "gamma_sign", "theta", "theta_sign"}
MEMBER_KEYS = {"A", "drift", "c"}
PROFILE_KEYS = {
    "constant": {"value"},
    "polynomial": {"coeffs", "axis"},
    "sine": {"k", "amplitude"},
    "cosine": {"k", "amplitude"},
    "box": {"lo", "hi", "value", "outside"},
    "inverse_distance": {"center", "c", "eps", "cap"},
}
KIND_ALIASES = {
    "linear": "linear", "pucci_plus": "pucci_plus", "pucci_minus": "pucci_minus", "max": "max", "max_of": "max",
    "min": "min", "min_of": "min", "inf_sup": "inf_sup", "sup_inf": "sup_inf", "laplacian": "laplacian",
}
REQUIRED = {
    "eigen": ("grid", "operators"),
    "curve": ("grid", "operators", "exponents"),
    "solve": ("grid", "operators", "exponents", "parameters", "data"),
    "mp-check": ("grid", "operators", "exponents", "parameters"),
    "amp-scan": ("grid", "operators", "exponents", "data"),
    "small-domain": ("operators", "exponents", "parameters"),
    "isolation": ("grid", "operators", "exponents", "parameters"),
    "verify-fucik": ("grid", "parameters", "exponents"),
    "verify-scalar": ("grid", "operators"),
}


class ConfigError(Exception):
    def __init__(self, msg: str, line: int | None = None, path: str = "<config>"):
        self.line = line
        self.path = path
        super().__init__(f"{path}:{line}: {msg}" if line else f"{path}: {msg}")


# --- YAML with line marks ---------------------------------------------------------------

class Node:
    """Plain value plus the 1-based source line it came from."""

    def __init__(self, value, line: int):
        self.value = value
        self.line = line

    def plain(self):
        v = self.value
        if isinstance(v, dict):
            return {k: n.plain() for k, n in v.items()}
        if isinstance(v, list):
            return [n.plain() for n in v]
        return v


def _convert(node: yaml.Node, src: str) -> Node:
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1, src)
            child = _convert(v, src)
            child.key_line = k.start_mark.line + 1
            out[key] = child
        return Node(out, line)
    if isinstance(node, yaml.SequenceNode):
        return Node([_convert(v, src) for v in node.value], line)
    return Node(yaml.safe_load(yaml.serialize(node)) if node.tag != "tag:yaml.org,2002:str" else node.value, line)


def load_config(path) -> Node:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from None
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, str(path)) from None
    if root is None or not isinstance(root, yaml.MappingNode):
        raise ConfigError("config must be a mapping", 1, str(path))
    return _convert(root, str(path))


class Config:
    def __init__(self, root: Node, src: str):
        self.root = root
        self.src = src

    def fail(self, msg: str, node: Node | None = None):
        raise ConfigError(msg, node.line if node is not None else None, self.src)

    def check_keys(self, node: Node, allowed, where: str):
        if not isinstance(node.value, dict):
            self.fail(f"{where} must be a mapping", node)
        for k, child in node.value.items():
            if k not in allowed:
                raise ConfigError(f"unknown key {k!r} in {where}", getattr(child, "key_line", child.line), self.src)

    def block(self, name: str, required: bool = False) -> Node | None:
        node = self.root.value.get(name)
        if node is None and required:
            self.fail(f"missing required block {name!r}", self.root)
        return node

    def get(self, block: str, key: str, default=None, required: bool = False):
        b = self.block(block)
        if b is None or key not in b.value:
            if required:
                self.fail(f"missing required key {block}.{key}", b or self.root)
            return default
        return b.value[key].plain()

    def number(self, block: str, key: str, default=None, required: bool = False) -> float:
        val = self.get(block, key, default, required)
        if val is None:
            return None
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(f"{block}.{key} must be a number", self.block(block).value[key])
        return float(val)


def validate(cfg: Config, task: str) -> None:
    root = cfg.root
    cfg.check_keys(root, TOP_KEYS, "top level")
    declared = root.value.get("task")
    if declared is not None and declared.value != task:
        cfg.fail(f"config declares task {declared.value!r} but {task!r} was requested", declared)
    for name, node in root.value.items():
        if name in BLOCK_KEYS:
            cfg.check_keys(node, BLOCK_KEYS[name], name)
    for name in REQUIRED[task]:
        cfg.block(name, required=True)
    ops = cfg.block("operators")
    if ops is not None:
        for name, node in ops.value.items():
            _check_operator(cfg, node, f"operators.{name}")
        need = ("F1",) if task in ("eigen", "verify-scalar") else ("F1", "F2")
        for name in need:
            if name not in ops.value:
                cfg.fail(f"missing required operator block operators.{name}", ops)
    for block in ("weights", "data"):
        b = cfg.block(block)
        if b is not None:
            for name, node in b.value.items():
                _check_profile(cfg, node, f"{block}.{name}")


def _check_operator(cfg: Config, node: Node, where: str):
    cfg.check_keys(node, OPERATOR_KEYS, where)
    kind = node.value.get("kind")
    if kind is None:
        cfg.fail(f"{where} needs a 'kind'", node)
    if kind.value not in KIND_ALIASES:
        cfg.fail(f"unknown operator kind {kind.value!r}", kind)
    for key in ("members",):
        if key in node.value:
            for m in node.value[key].value:
                cfg.check_keys(m, MEMBER_KEYS, f"{where}.{key}[]")
    if "family" in node.value:
        for row in node.value["family"].value:
            for m in row.value:
                cfg.check_keys(m, MEMBER_KEYS, f"{where}.family[][]")
    for key in ("A", "drift", "c", "gamma", "theta"):
        if key in node.value and isinstance(node.value[key].value, dict):
            _check_profile(cfg, node.value[key], f"{where}.{key}")


def _check_profile(cfg: Config, node: Node, where: str):
    if not isinstance(node.value, dict):
        return
    t = node.value.get("type")
    if t is None or t.value not in PROFILE_KEYS:
        cfg.fail(f"{where}: profile type must be one of {sorted(PROFILE_KEYS)}", t or node)
    cfg.check_keys(node, PROFILE_KEYS[t.value] | {"type"}, where)


# --- profiles and specs ---------------------------------------------------------------------

def profile_fn(spec, grid: Grid):
    """Whitelisted analytic profile as a function of node coordinates ``(M, d)``."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return lambda pts: np.full(len(pts), float(spec))
    t = spec["type"]
    lo = np.array([a for a, _ in grid.extents])
    length = np.array(grid.lengths)
    if t == "constant":
        return lambda pts: np.full(len(pts), float(spec.get("value", 1.0)))
    if t == "polynomial":
        coeffs = [float(c) for c in spec["coeffs"]]
        ax = int(spec.get("axis", 0))
        return lambda pts: np.polynomial.polynomial.polyval(pts[:, ax], coeffs)
    if t in ("sine", "cosine"):
        k = np.broadcast_to(np.asarray(spec.get("k", 1), dtype=float), (grid.dim,))
        amp = float(spec.get("amplitude", 1.0))
        fn = np.sin if t == "sine" else np.cos
        return lambda pts: amp * np.prod(fn(k * np.pi * (pts - lo) / length), axis=1)
    if t == "box":
        a = np.broadcast_to(np.asarray(spec["lo"], dtype=float), (grid.dim,))
        b = np.broadcast_to(np.asarray(spec["hi"], dtype=float), (grid.dim,))
        val, out = float(spec.get("value", 1.0)), float(spec.get("outside", 0.0))
        return lambda pts: np.where(np.all((pts >= a) & (pts <= b), axis=1), val, out)
    if t == "inverse_distance":
        x0 = np.broadcast_to(np.asarray(spec.get("center", lo), dtype=float), (grid.dim,))
        c, eps, cap = float(spec.get("c", 1.0)), float(spec.get("eps", 1e-2)), float(spec.get("cap", 1e3))
        def clipped(pts):
            with np.errstate(divide="ignore"):  # the singular point itself is clipped to cap
                return np.minimum(c / (np.linalg.norm(pts - x0, axis=1) + eps), cap)

        return clipped
    raise ValueError(f"unknown profile type {t!r}")


def profile_field(spec, grid: Grid) -> Field:
    return Field(grid, profile_fn(spec, grid)(grid.points))


def _coef(val, grid: Grid):
    if isinstance(val, dict):
        return profile_fn(val, grid)
    return np.asarray(val, dtype=float) if isinstance(val, list) else float(val)


def _member(d: dict, grid: Grid) -> LinearOpSpec:
    return LinearOpSpec(_coef(d.get("A", 1.0), grid), _coef(d.get("drift", 0.0), grid), _coef(d.get("c", 0.0), grid))


def build_operator(d: dict, grid: Grid) -> OperatorSpec:
    kind = KIND_ALIASES[d["kind"]]
    extra = {
        "gamma": _coef(d.get("gamma", 0.0), grid),
        "gamma_sign": int(d.get("gamma_sign", 1)),
        "theta": _coef(d.get("theta", 0.0), grid),
        "theta_sign": int(d.get("theta_sign", 1)),
    }
    if "ellipticity" in d:
        a, b = d["ellipticity"]
        extra["ellipticity"] = EllipticityPair(float(a), float(b))
    if kind == "laplacian":
        return laplacian(float(d.get("A", 1.0))).with_terms(**extra)
    if kind == "linear":
        return OperatorSpec("linear", (_member(d, grid),), c=0.0, **extra)
    if kind.startswith("pucci"):
        return OperatorSpec(kind, **extra)
    if kind in ("max", "min"):
        return OperatorSpec(kind, tuple(_member(m, grid) for m in d.get("members", [])), **extra)
    fam = tuple(tuple(_member(m, grid) for m in row) for row in d.get("family", []))
    return OperatorSpec(kind, fam, **extra)


# --- JSON output ---------------------------------------------------------------------------------

def _json_scalar(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return "%.17g" % x
    if isinstance(x, str):
        return json_string(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def json_string(s: str) -> str:
    return json.dumps(s)


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json_string(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json_scalar(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    return _json_scalar(obj)


def write_json(obj, path) -> None:
    Path(path).write_text(to_json(obj) + "\n")


# --- tasks -----------------------------------------------------------------------------------------

class Context:
    def __init__(self, cfg: Config, out: Path, seed: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        g = cfg.block("grid")
        self.grid = None
        if g is not None:
            ext = cfg.get("grid", "extents", required=True)
            n = cfg.get("grid", "n", required=True)
            try:
                self.grid = make_uniform_grid(ext, n)
            except (ValueError, TypeError) as exc:
                cfg.fail(f"bad grid: {exc}", g)

    def op(self, name: str) -> OperatorSpec:
        node = self.cfg.block("operators").value[name]
        try:
            return build_operator(node.plain(), self.grid or make_uniform_grid((0.0, 1.0), 3))
        except (ValueError, TypeError) as exc:
            self.cfg.fail(f"bad operator {name}: {exc}", node)

    def weight(self, name: str, default=1.0) -> Field:
        val = self.cfg.get("weights", name, default)
        return profile_field(val, self.grid)

    def data(self, name: str) -> Field:
        val = self.cfg.get("data", name, required=True)
        f = profile_field(val, self.grid).values.copy()
        f[self.grid.boundary] = 0.0
        return Field(self.grid, f)

    def exps(self) -> ExponentPair:
        try:
            return ExponentPair(self.cfg.number("exponents", "p", required=True), self.cfg.number("exponents", "q", required=True))
        except ValueError as exc:
            self.cfg.fail(str(exc), self.cfg.block("exponents"))

    def param(self, key, default=None, required=False):
        return self.cfg.get("parameters", key, default, required)


def _task_eigen(ctx: Context) -> tuple[dict, bool]:
    sign = ctx.param("sign", "+")
    signs = ["+", "-"] if sign == "both" else [sign]
    ops = ctx.cfg.block("operators").value
    tol = ctx.cfg.number("tolerances", "eigen", 1e-8)
    pairs = []
    for s in signs:
        if "F2" in ops:
            e = system_principal_eigen(ctx.op("F1"), ctx.op("F2"), ctx.weight("tau1"), ctx.weight("tau2"), ctx.exps(), s, tol=tol)
        else:
            w = ctx.weight("theta", ctx.cfg.get("weights", "tau1", 1.0))
            e = scalar_principal_eigen(ctx.op("F1"), w, s, tol=tol)
        e.write(ctx.out, "field_plus" if s == "+" else "field_minus")
        pairs.append(e)
    result = pairs[0].to_json() if len(pairs) == 1 else {"plus": pairs[0].to_json(), "minus": pairs[1].to_json()}
    return result, all(e.converged for e in pairs)


def _anchors(ctx: Context):
    F1, F2 = ctx.op("F1"), ctx.op("F2")
    t1, t2, ex = ctx.weight("tau1"), ctx.weight("tau2"), ctx.exps()
    plus = system_principal_eigen(F1, F2, t1, t2, ex, "+")
    minus = system_principal_eigen(F1, F2, t1, t2, ex, "-")
    return plus, minus


def _task_curve(ctx: Context):
    plus, minus = _anchors(ctx)
    p = ctx.exps().p
    curves = [SpectralCurve(plus.lambda1, p, "plus"), SpectralCurve(minus.lambda1, p, "minus")]
    m = min(plus.lambda1, minus.lambda1)
    lo = float(ctx.param("lambda_min", 0.1 * m))
    hi = float(ctx.param("lambda_max", 10 * m))
    n = int(ctx.param("n_samples", 50))
    write_curves_csv(ctx.out / "curve.csv", curves, lo, hi, n)
    return {"lambda1_plus": plus.lambda1, "lambda1_minus": minus.lambda1, "p": p, "n_samples": n}, plus.converged and minus.converged


def _system(ctx: Context, lam: float, mu: float) -> SystemProblem:
    return SystemProblem(ctx.op("F1"), ctx.op("F2"), ctx.weight("tau1"), ctx.weight("tau2"), ctx.exps(), lam, mu, ctx.data("f1"), ctx.data("f2"))


def _task_solve(ctx: Context):
    lam = float(ctx.param("lambda", required=True))
    mu = float(ctx.param("mu", required=True))
    prob = _system(ctx, lam, mu)
    method = ctx.param("method", "sublinear" if prob.exps.regime == "sublinear" else "picard")
    tol = ctx.cfg.number("tolerances", "solve", 1e-8)
    extra = {}
    if method == "picard":
        u, v, rep = solve_system_picard(prob, tol=tol)
    elif method == "monotone":
        u, v, rep = solve_system_monotone_signed(prob)
    elif method == "sublinear":
        res = solve_sublinear(prob)
        u, v, rep = res.u, res.v, res.report
        extra = {"eps": res.eps, "k": res.k, "start_gap": res.start_gap}
    else:
        ctx.cfg.fail(f"unknown solve method {method!r}", ctx.cfg.block("parameters"))
    write_field_csv(u, ctx.out / "field_u.csv", "u")
    write_field_csv(v, ctx.out / "field_v.csv", "v")
    return {"lambda": lam, "mu": mu, "method": method, "report": rep.to_json(), **extra}, rep.converged


def _task_mp_check(ctx: Context):
    lams = [float(x) for x in ctx.param("lambdas", required=True)]
    mus = [float(x) for x in ctx.param("mus", required=True)]
    base = SystemProblem(ctx.op("F1"), ctx.op("F2"), ctx.weight("tau1"), ctx.weight("tau2"), ctx.exps(), 1.0, 1.0,
                         Field.zeros(ctx.grid), Field.zeros(ctx.grid))
    bank_p = build_witness_bank(base)
    bank_m = build_witness_bank(base.reflected())
    p = base.exps.p
    cp = SpectralCurve(bank_p.plus.lambda1, p, "plus")
    cm = SpectralCurve(bank_m.plus.lambda1, p, "minus")
    rng = np.random.default_rng(ctx.seed)
    battery = int(ctx.param("battery", 4))
    rows, agree = [], 0
    for lam in lams:
        for mu in mus:
            prob = base.with_params(lam=lam, mu=mu)
            pred = classify(lam, mu, cp, cm)
            a = mp_survey(prob, bank_p, rng, battery, "MP")
            b = mp_survey(prob, bank_m, rng, battery, "mP")
            ok = a.verdict == pred.mp_holds and b.verdict == pred.mP_holds
            agree += ok
            rows.append((lam, mu, pred.mp_holds, a.verdict, pred.mP_holds, b.verdict, ok))
    with open(ctx.out / "scan.csv", "w") as fh:
        fh.write("lambda,mu,mp_predicted,mp_measured,mP_predicted,mP_measured,agree\n")
        for r in rows:
            fh.write(",".join(format(x, ".17g") if isinstance(x, float) else str(x) for x in r) + "\n")
    return {"lambda1_plus": cp.anchor, "lambda1_minus": cm.anchor, "agreement": agree, "total": len(rows)}, True


def _task_amp(ctx: Context):
    offsets = ctx.param("offsets")
    rep = amp_scan(ctx.op("F1"), ctx.op("F2"), ctx.weight("tau1"), ctx.weight("tau2"), ctx.exps(), ctx.data("f1"), ctx.data("f2"), offsets)
    rep.write_csv(ctx.out / "scan.csv")
    out = rep.to_json()
    out.pop("table", None)
    return out, True


def _task_small_domain(ctx: Context):
    n = ctx.grid.n[0] if ctx.grid is not None else 199
    rep = small_domain_threshold(
        ctx.op("F1"),
        ctx.op("F2"),
        ctx.exps(),
        float(ctx.param("lambda", required=True)),
        float(ctx.param("mu", required=True)),
        L_max=float(ctx.param("L_max", 2.0)),
        n=n,
        battery=int(ctx.param("battery", 32)),
        cap=float(ctx.param("cap", 1.0)),
        seed=ctx.seed,
        weight_length=ctx.param("weight_length"),
    )
    return rep.to_json(), True


def _task_isolation(ctx: Context):
    lams = ctx.param("lambdas")
    if lams is None:
        lams = np.linspace(float(ctx.param("lambda_min", required=True)), float(ctx.param("lambda_max", required=True)), int(ctx.param("n_samples", 20)))
    rep = isolation_scan(ctx.op("F1"), ctx.op("F2"), ctx.weight("tau1"), ctx.weight("tau2"), ctx.exps(), [float(x) for x in lams],
                         sweeps=int(ctx.param("sweeps", 50)), starts=int(ctx.param("starts", 4)), seed=ctx.seed)
    rep.write_csv(ctx.out / "scan.csv")
    out = rep.to_json()
    out.pop("table", None)
    return out, True


def verify_fucik(kappa: float, p: float, q: float, grid: Grid, base: LinearOpSpec | None = None) -> dict:
    """Measured vs predicted ``lambda1^+ / sigma = kappa^(q/(q+1))`` and ``lambda1^- / sigma = kappa^(1/(q+1))``."""
    if not kappa > 1:
        raise ValueError("kappa must exceed 1")
    exps = ExponentPair(p, q)
    one = Field.constant(grid, 1.0)
    L = OperatorSpec("linear", (base or LinearOpSpec(),))
    sigma = system_principal_eigen(L, L, one, one, exps)
    F1, F2 = fucik_pair(kappa, base)
    plus = system_principal_eigen(F1, F2, one, one, exps, "+")
    minus = system_principal_eigen(F1, F2, one, one, exps, "-")
    pred_p, pred_m = kappa ** (q / (q + 1)), kappa ** (1 / (q + 1))
    rp, rm = plus.lambda1 / sigma.lambda1, minus.lambda1 / sigma.lambda1
    if plus.lambda1 < minus.lambda1 * (1 - 1e-9):
        order = "plus below minus"
    elif minus.lambda1 < plus.lambda1 * (1 - 1e-9):
        order = "minus below plus"
    else:
        order = "coincide"
    expected = "plus below minus" if q < 1 else "minus below plus" if q > 1 else "coincide"
    return {
        "kappa": kappa,
        "p": p,
        "q": q,
        "sigma": sigma.lambda1,
        "lambda1_plus": plus.lambda1,
        "lambda1_minus": minus.lambda1,
        "ratio_plus": rp,
        "ratio_minus": rm,
        "predicted_plus": pred_p,
        "predicted_minus": pred_m,
        "rel_err_plus": abs(rp / pred_p - 1),
        "rel_err_minus": abs(rm / pred_m - 1),
        "ordering": order,
        "ordering_expected": expected,
        "converged": bool(sigma.converged and plus.converged and minus.converged),
    }


def _task_fucik(ctx: Context):
    kappa = ctx.cfg.number("parameters", "kappa", required=True)
    ex = ctx.exps()
    try:
        rep = verify_fucik(kappa, ex.p, ex.q, ctx.grid)
    except ValueError as exc:
        ctx.cfg.fail(str(exc), ctx.cfg.block("parameters"))
    return rep, rep["converged"]


def _task_scalar(ctx: Context):
    F = ctx.op("F1")
    w = ctx.weight("theta", ctx.cfg.get("weights", "tau1", 1.0))
    grid = ctx.grid
    plus = scalar_principal_eigen(F, w, "+")
    minus = scalar_principal_eigen(F, w, "-")
    plus.write(ctx.out, "field_plus")
    minus.write(ctx.out, "field_minus")
    # empirical ABP constant from the extremal problem with unit forcing
    b = structure_bounds(F, grid.points[grid.interior])
    e = EllipticityPair(float(np.min(b.alpha)), float(np.max(b.beta)))
    gam = float(np.max(b.gamma))
    ext = OperatorSpec("pucci_plus", ellipticity=e, gamma=gam)
    f = Field.constant(grid, -1.0)
    u, rep = solve_nonlinear(DirichletProblem(discretize(ext, grid), f))
    audit = abp_audit(u, f, gam, e)
    C_A = audit["ratio"]
    result = {
        "lambda1_plus": plus.lambda1,
        "lambda1_minus": minus.lambda1,
        "C_A": C_A,
        "abp_lower_bound": abp_lower_bound(w, C_A) if C_A > 0 else float("inf"),
        "plus": plus.to_json(),
        "minus": minus.to_json(),
    }
    return result, plus.converged and minus.converged and rep.converged


HANDLERS = {
    "eigen": _task_eigen,
    "curve": _task_curve,
    "solve": _task_solve,
    "mp-check": _task_mp_check,
    "amp-scan": _task_amp,
    "small-domain": _task_small_domain,
    "isolation": _task_isolation,
    "verify-fucik": _task_fucik,
    "verify-scalar": _task_scalar,
}


def run(task: str, config_path, out_dir=None, seed: int | None = None) -> int:
    """Run one task; returns the process exit code (0 ok, 2 not converged, 1 config or I/O error)."""
    try:
        if task not in TASKS:
            raise ConfigError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
        cfg = Config(load_config(config_path), str(config_path))
        validate(cfg, task)
        out = out_dir or cfg.get("output", "dir", "out")
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        if seed is None:
            s = cfg.root.value.get("seed")
            seed = int(s.value) if s is not None else 0
        ctx = Context(cfg, out, seed)
        result, ok = HANDLERS[task](ctx)
        payload = {"task": task, "seed": seed, "converged": bool(ok), "result": result}
        write_json(payload, out / "result.json")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EigenConvergenceError, PositivityLossError, SingularSystemError, FloatingPointError) as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lespectra", description=__doc__)
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        ap.error("seed must be an unsigned 64-bit integer")
    return run(args.task, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
