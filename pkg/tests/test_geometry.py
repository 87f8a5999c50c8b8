import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lespectra.geometry import (
    Field,
    GridMismatchError,
    hopf_quotients,
    inward_normal,
    lp_norm,
    make_uniform_grid,
    read_field_csv,
    sup_norm,
    write_field_csv,
)


def test_interval_nodes_and_spacing(line):
    assert line.size == 101
    assert line.h == pytest.approx((0.01,))
    assert np.array_equal(line.boundary, [0, 100])
    assert line.interior.size == 99


def test_square_boundary_count(square):
    assert square.size == 17 * 17
    assert square.boundary.size == 4 * 16
    assert np.all(square.boundary_mask[square.boundary])


@pytest.mark.parametrize("ext, n", [((1.0, 1.0), 5), ((0.0, 1.0), 2), ([(0, 1), (0, 1), (0, 1)], 5)])
def test_bad_grids_rejected(ext, n):
    with pytest.raises(ValueError):
        make_uniform_grid(ext, n)


@given(
    a=st.floats(-5, 5),
    length=st.floats(0.1, 10),
    n=st.integers(3, 40),
    m=st.integers(3, 12),
)
@settings(max_examples=60, deadline=None)
def test_quadrature_and_partition(a, length, n, m):
    g = make_uniform_grid([(a, a + length), (0.0, 2.0)], (n, m))
    assert g.quadrature_weights().sum() == pytest.approx(2 * length, rel=1e-12)
    both = np.sort(np.concatenate([g.interior, g.boundary]))
    assert np.array_equal(both, np.arange(g.size))
    assert np.all(g.distance_profile()[g.boundary] == 0)
    assert np.all(g.distance_profile()[g.interior] > 0)


def test_norms(line):
    one = Field.constant(line, 1.0)
    assert lp_norm(one, 1) == pytest.approx(1.0)
    assert sup_norm(Field(line, np.sin(np.pi * line.points[:, 0]) * -3)) == pytest.approx(3.0)
    x = line.points[:, 0]
    # trapezoid is second order: int_0^1 x^2 = 1/3
    assert lp_norm(Field(line, x), 2) ** 2 == pytest.approx(1 / 3, abs=1e-4)


def test_field_arithmetic_and_mismatch(line, square):
    f = Field.constant(line, 2.0)
    assert (f * 3 - 1).allclose(Field.constant(line, 5.0))
    with pytest.raises(GridMismatchError):
        _ = f + Field.zeros(make_uniform_grid((0.0, 2.0), 99))
    with pytest.raises(ValueError):
        Field(square, np.zeros(3))


def test_hopf_quotients_of_sine(square):
    x, y = square.points.T
    f = Field(square, np.sin(np.pi * x) * np.sin(np.pi * y))
    q = hopf_quotients(f)
    corners = {square.node_at(0, 0), square.node_at(0, 16), square.node_at(16, 0), square.node_at(16, 16)}
    edge = np.array([b not in corners for b in square.boundary])
    assert np.all(q[edge] >= 0)
    assert np.all(q[~edge] > 0)
    assert inward_normal(square, square.node_at(0, 5)) == (1, 0)
    with pytest.raises(ValueError):
        inward_normal(square, square.node_at(3, 3))


def test_csv_round_trip(tmp_path, square, rng):
    f = Field(square, rng.standard_normal(square.size))
    write_field_csv(f, tmp_path / "f.csv", "u")
    g = read_field_csv(tmp_path / "f.csv", square)
    assert g == f
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x,y,u"
    with pytest.raises(ValueError):
        read_field_csv(tmp_path / "f.csv", make_uniform_grid((0.0, 1.0), 9))
