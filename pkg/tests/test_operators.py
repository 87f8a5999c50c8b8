import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from randops import random_jet, random_operator, random_psd, random_sym

from lespectra.geometry import Field, make_uniform_grid
from lespectra.operators import (
    KINDS,
    EllipticityPair,
    LinearOpSpec,
    OperatorSpec,
    active_weights,
    discretize,
    envelope_is_exact,
    evaluate,
    extremal_value,
    fucik_pair,
    is_proper,
    laplacian,
    linear,
    lower_envelope,
    max_of,
    min_of,
    pucci_minus,
    pucci_plus,
    pucci_plus_op,
    reflect,
    sample_coef,
    structure_bounds,
    sup_inf,
    inf_sup,
    sym_eig2,
    upper_envelope,
    zero_order_upper,
)

E12 = EllipticityPair(1.0, 2.0)
ORIGIN = np.zeros(2)


def test_pucci_closed_form_examples():
    X = np.diag([1.0, -1.0])
    assert pucci_plus(X, E12) == pytest.approx(1.0)
    assert pucci_minus(X, E12) == pytest.approx(-1.0)
    assert pucci_plus(np.array([[-4.0]]), E12) == pytest.approx(-4.0)
    assert pucci_minus(np.array([[3.0]]), E12) == pytest.approx(3.0)


def test_pucci_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        pucci_plus(np.array([[0.0, 1.0], [0.0, 0.0]]), E12)


def test_sym_eig2_reconstructs(rng):
    X = random_sym(rng, 500, 2)
    ev, vec = sym_eig2(X)
    back = np.einsum("mik,mk,mjk->mij", vec, ev, vec)
    assert np.allclose(back, X, atol=1e-12)
    assert np.all(ev[:, 0] <= ev[:, 1] + 1e-15) or np.all(np.isfinite(ev))


def test_ellipticity_pair_validation():
    with pytest.raises(ValueError):
        EllipticityPair(2.0, 1.0)
    with pytest.raises(ValueError):
        EllipticityPair(0.0, 1.0)


def test_max_of_pointwise():
    op = max_of([LinearOpSpec(1.0), LinearOpSpec(4.0)])
    assert evaluate(op, [0.5], 0.0, [0.0], [[-1.0]]) == pytest.approx(-1.0)
    assert evaluate(op, [0.5], 0.0, [0.0], [[1.0]]) == pytest.approx(4.0)
    assert evaluate(min_of(op.members), [0.5], 0.0, [0.0], [[1.0]]) == pytest.approx(1.0)


def test_inf_sup_order_of_operations():
    # min over rows of max over columns
    m = [LinearOpSpec(k) for k in (1.0, 2.0, 3.0, 4.0)]
    op = inf_sup([[m[0], m[3]], [m[1], m[2]]])
    assert evaluate(op, [0.0], 0.0, [0.0], [[1.0]]) == pytest.approx(3.0)
    assert evaluate(reflect(op), [0.0], 0.0, [0.0], [[-1.0]]) == pytest.approx(-3.0)
    op2 = sup_inf([[m[0], m[3]], [m[1], m[2]]])
    assert evaluate(op2, [0.0], 0.0, [0.0], [[1.0]]) == pytest.approx(2.0)


def test_extra_terms_with_drift():
    op = pucci_plus_op(1.0, 2.0, gamma=1.0)
    assert evaluate(op, [0.0], 0.0, [3.0], [[1.0]]) == pytest.approx(5.0)
    op = linear(A=1.0, drift=1.0)
    assert evaluate(op, [0.0], 0.0, [1.0], [[0.0]]) == pytest.approx(1.0)
    op = laplacian().with_terms(theta=2.0, theta_sign=-1)
    assert evaluate(op, [0.0], -3.0, [0.0], [[0.0]]) == pytest.approx(-6.0)


def test_active_weights_reproduce_value(rng):
    for kind in KINDS:
        op = random_operator(rng, kind, 200, 2)
        x, r, xi, X = random_jet(rng, 200, 2)
        w = active_weights(op, x, r, xi, X)
        lin = w.r * r + np.sum((w.gp + w.gm) * xi, -1) + np.einsum("mij,mij->m", w.X, X)
        assert np.allclose(lin, evaluate(op, x, r, xi, X), atol=1e-10), kind


def test_sample_coef_forms(square):
    pts = square.points
    assert sample_coef(2.0, pts, 2).shape == (square.size, 2, 2)
    assert np.allclose(sample_coef(2.0, pts, 2)[0], 2 * np.eye(2))
    assert np.allclose(sample_coef(lambda p: p[:, 0], pts, 0), pts[:, 0])
    f = Field(square, pts[:, 1] ** 2)
    assert np.allclose(sample_coef(f, pts, 0), pts[:, 1] ** 2)
    assert sample_coef([1.0, -1.0], pts, 1).shape == (square.size, 2)


def test_nonsymmetric_member_rejected():
    op = linear(A=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        evaluate(op, ORIGIN, 0.0, ORIGIN, np.eye(2))


def test_ellipticity_violation_rejected():
    op = OperatorSpec("max", (LinearOpSpec(5.0),), ellipticity=E12)
    with pytest.raises(ValueError):
        evaluate(op, [0.0], 0.0, [0.0], [[1.0]])


def test_constructor_validation():
    with pytest.raises(ValueError):
        OperatorSpec("bellman")
    with pytest.raises(ValueError):
        OperatorSpec("max", ())
    with pytest.raises(ValueError):
        OperatorSpec("pucci_plus")
    with pytest.raises(ValueError):
        inf_sup([[LinearOpSpec()], [LinearOpSpec(), LinearOpSpec()]])


def test_reflection_kinds_and_involution():
    op = pucci_plus_op(1, 2, gamma=0.3, theta=0.2)
    g = reflect(op)
    assert g.kind == "pucci_minus" and g.gamma_sign == -1 and g.theta_sign == -1
    assert reflect(g) == op
    a, b = fucik_pair(4.0)
    assert reflect(a).kind == "min" and reflect(b).kind == "max"


def test_envelopes_and_exactness():
    F1, F2 = fucik_pair(4.0)
    assert upper_envelope(F1) == F1
    assert lower_envelope(F2) == F2
    assert envelope_is_exact(F1, True) and envelope_is_exact(F1, False)
    fam = inf_sup([[LinearOpSpec(1.0), LinearOpSpec(2.0)], [LinearOpSpec(3.0), LinearOpSpec(0.5)]])
    assert upper_envelope(fam).kind == "max" and len(upper_envelope(fam).members) == 4
    assert not envelope_is_exact(fam)
    assert upper_envelope(pucci_plus_op(1, 2)).kind == "pucci_plus"
    assert lower_envelope(pucci_plus_op(1, 2)).kind == "pucci_minus"


def test_structure_bounds_and_properness():
    op = max_of([LinearOpSpec(1.0, 2.0, -1.0), LinearOpSpec(3.0, 0.0, 0.0)])
    b = structure_bounds(op, np.zeros((1, 1)))
    assert (b.alpha[0], b.beta[0], b.gamma[0], b.theta[0]) == (1.0, 3.0, 2.0, 1.0)
    assert is_proper(op, np.zeros((1, 1)))
    assert not is_proper(linear(c=3.0), np.zeros((1, 1)))
    assert zero_order_upper(linear(c=3.0), np.zeros((1, 1)))[0] == 3.0


@pytest.mark.parametrize("kind", KINDS)
def test_envelope_sandwich(rng, kind):
    M, d = 2000, 2
    op = random_operator(rng, kind, M, d)
    x, r, xi, X = random_jet(rng, M, d)
    b = structure_bounds(op, x)
    vals = [
        extremal_value(b, -1, r, xi, X),
        evaluate(lower_envelope(op), x, r, xi, X),
        evaluate(op, x, r, xi, X),
        evaluate(upper_envelope(op), x, r, xi, X),
        extremal_value(b, 1, r, xi, X),
    ]
    for lo, hi in zip(vals, vals[1:]):
        assert np.all(lo <= hi + 1e-10)


@given(t=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(KINDS))
@settings(max_examples=40, deadline=None)
def test_positive_homogeneity(t, seed, kind):
    rng = np.random.default_rng(seed)
    op = random_operator(rng, kind, 50, 2)
    x, r, xi, X = random_jet(rng, 50, 2)
    a = evaluate(op, x, t * r, t * xi, t * X)
    assert np.allclose(a, t * evaluate(op, x, r, xi, X), rtol=1e-10, atol=1e-10 * t)


@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(KINDS))
@settings(max_examples=40, deadline=None)
def test_degenerate_ellipticity(seed, kind):
    rng = np.random.default_rng(seed)
    op = random_operator(rng, kind, 50, 2)
    x, r, xi, X = random_jet(rng, 50, 2)
    P = random_psd(rng, 50, 2)
    b = structure_bounds(op, x)
    diff = evaluate(op, x, r, xi, X + P) - evaluate(op, x, r, xi, X)
    tr = np.trace(P, axis1=1, axis2=2)
    assert np.all(diff >= b.alpha * tr - 1e-9) and np.all(diff <= b.beta * tr + 1e-9)


@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(KINDS))
@settings(max_examples=40, deadline=None)
def test_reflection_formula(seed, kind):
    rng = np.random.default_rng(seed)
    op = random_operator(rng, kind, 50, 2)
    x, r, xi, X = random_jet(rng, 50, 2)
    assert np.allclose(evaluate(reflect(op), x, r, xi, X), -evaluate(op, x, -r, -xi, -X), atol=1e-10)


# --- discretization -----------------------------------------------------------------------

def test_laplacian_of_quadratic_is_exact(line):
    x = line.points[:, 0]
    dop = discretize(laplacian(), line)
    assert np.allclose(dop.residual_values(x * (1 - x)), -2.0, atol=1e-9)


def test_drift_on_linear_function(line):
    x = line.points[:, 0]
    for b in (1.0, -1.0):
        dop = discretize(linear(drift=b), line)
        assert np.allclose(dop.residual_values(x), b)


@pytest.mark.parametrize("kind", KINDS)
def test_linearization_reproduces_operator(square, rng, kind):
    op = random_operator(rng, kind, 1, 2)
    # broadcast per-point arrays from a single random sample
    dop = discretize(op, square)
    u = rng.normal(size=square.size)
    J, val, _ = dop.linearize(u)
    assert np.allclose(J @ u, val, atol=1e-8 * (1 + np.abs(val).max()))


@pytest.mark.parametrize("kind", ["linear", "max", "min", "inf_sup", "sup_inf", "pucci_plus"])
def test_one_dimensional_scheme_is_monotone(line, rng, kind):
    op = random_operator(rng, kind, 1, 1)
    dop = discretize(op, line)
    J, _, _ = dop.linearize(rng.normal(size=line.size))
    J = J.toarray()
    rows = np.arange(J.shape[0])
    own = line.interior
    off = J.copy()
    off[rows, own] = 0.0
    assert np.all(off >= -1e-12)
    assert dop.monotone


def test_mixed_term_flags_nonmonotone(square):
    assert not discretize(pucci_plus_op(1, 2), square).monotone
    assert discretize(laplacian(), square).monotone


def test_grid_field_coefficient_must_match(square):
    other = make_uniform_grid([(0.0, 2.0), (0.0, 2.0)], 5)
    op = linear(c=Field(other, np.zeros(other.size)))
    with pytest.raises(ValueError):
        discretize(op, square)
