import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layersep.fields import (
    BOTTOM,
    TOP,
    ChannelGeometry,
    Grid,
    ScalarField,
    ShapeError,
    SpaceTimeDensity,
    VelocityField,
    J_of,
    curl2d,
    dirichlet_form,
    divergence,
    gradient,
    inner,
    l2_norm,
    laplacian,
    load_field,
    save_field,
    shear_field,
    solve_tridiagonal,
    wall_normal_derivative,
)


def grid(nx=8, ny=16, W=1.0, H=1.0):
    return Grid(ChannelGeometry(W, H), nx, ny)


def test_geometry_measures():
    g = ChannelGeometry(2.0, 0.5)
    assert g.area == 1.0
    assert g.boundary_measure == 4.0
    assert g.scaled(10.0).W == 20.0


def test_geometry_rejects_bad_sizes():
    with pytest.raises(ValueError):
        ChannelGeometry(0.0, 1.0)


def test_velocity_shape_checked():
    g = grid()
    with pytest.raises(ShapeError):
        VelocityField(g, np.zeros((8, 16)), np.zeros((8, 16)))


def test_l2_norm_of_constant_shear():
    g = grid(W=2.0, H=0.5)
    u = shear_field(g, lambda y: 3.0 + 0 * y)
    assert l2_norm(u) == pytest.approx(3.0)


def test_inner_requires_same_grid():
    with pytest.raises(ShapeError):
        inner(VelocityField.zeros(grid()), VelocityField.zeros(grid(nx=4)))


def test_wall_derivative_of_linear_profile_exact():
    g = grid(ny=32)
    u = shear_field(g, lambda y: 2.0 * y)
    d_bottom = wall_normal_derivative(u.u1, g.dy, BOTTOM)
    np.testing.assert_allclose(d_bottom, 2.0, rtol=1e-12)


def test_wall_derivative_second_order():
    errs = []
    for ny in (32, 64, 128):
        g = grid(nx=4, ny=ny)
        u = shear_field(g, np.sin)
        errs.append(abs(wall_normal_derivative(u.u1, g.dy, BOTTOM)[0] - 1.0))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_curl_of_shear_is_minus_derivative():
    g = grid(nx=4, ny=64)
    u = shear_field(g, lambda y: y**2)
    w = curl2d(u)
    yc = g.y_centers
    # interior nodes sit on y faces
    np.testing.assert_allclose(w[0, 1:-1], -2 * g.y_faces[1:-1], atol=1e-10)
    assert yc.size == 64


def test_divergence_of_shear_is_zero():
    u = shear_field(grid(), lambda y: np.cos(3 * y))
    assert np.abs(divergence(u)).max() == 0.0


def test_dirichlet_form_matches_gradient_and_laplacian():
    rng = np.random.default_rng(0)
    g = grid(8, 12)
    u2 = rng.standard_normal((8, 13))
    u2[:, 0] = u2[:, -1] = 0.0
    u = VelocityField(g, rng.standard_normal((8, 12)), u2)
    assert dirichlet_form(u) == pytest.approx(-inner(laplacian(u), u))
    assert dirichlet_form(u) > 0
    assert gradient(u).shape == (2, 2, 8, 12)


def test_laplacian_symmetric():
    rng = np.random.default_rng(1)
    g = grid(6, 10)

    def rand():
        u2 = rng.standard_normal((6, 11))
        u2[:, [0, -1]] = 0.0
        return VelocityField(g, rng.standard_normal((6, 10)), u2)

    a, b = rand(), rand()
    assert inner(laplacian(a), b) == pytest.approx(inner(a, laplacian(b)), rel=1e-12)


def test_J_orientation():
    assert J_of(2.0, BOTTOM) == 2.0
    assert J_of(2.0, TOP) == -2.0
    assert J_of((1.0, 5.0), TOP) == -1.0
    with pytest.raises(ValueError):
        J_of(1.0, "side")


@given(st.integers(1, 5), st.integers(2, 40), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_tridiagonal_solver(batch, n, seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-1, 1, (batch, n))
    up = rng.uniform(-1, 1, (batch, n))
    di = 3.0 + rng.uniform(0, 1, (batch, n))
    rhs = rng.standard_normal((batch, n))
    x = solve_tridiagonal(lo, di, up, rhs)
    for b in range(batch):
        M = np.diag(di[b]) + np.diag(lo[b, 1:], -1) + np.diag(up[b, :-1], 1)
        np.testing.assert_allclose(M @ x[b], rhs[b], atol=1e-10)


def test_box_integral_of_constant_density():
    times = np.linspace(0, 1, 11)
    d = SpaceTimeDensity(times, np.full((11, 8, 8), 2.0), 1.0, 1.0)
    assert d.total() == pytest.approx(2.0)
    assert d.box_integral(0.1, 0.5, 0.25, 0.75, 0.0, 0.5) == pytest.approx(2 * 0.4 * 0.5 * 0.5)


def test_box_integral_periodic_and_zero_outside():
    times = np.linspace(0, 1, 5)
    d = SpaceTimeDensity(times, np.ones((5, 4, 4)), 1.0, 1.0)
    # x window wraps around once; y window sticks out of the channel
    assert d.box_integral(0.0, 1.0, -0.5, 0.5, -1.0, 0.5) == pytest.approx(0.5)
    assert d.box_integral(0.0, 1.0, 0.0, 3.0, 0.0, 1.0) == pytest.approx(3.0)
    assert d.box_integral(2.0, 3.0, 0.0, 1.0, 0.0, 1.0) == pytest.approx(0.0)


def test_density_scaling_total():
    rng = np.random.default_rng(2)
    d = SpaceTimeDensity(np.linspace(0, 1, 6), rng.random((6, 4, 5)), 1.0, 2.0)
    s = d.scaled(10.0, 3.0, 0.5)
    assert s.total() == pytest.approx(d.total() * 10 * 9 * 0.5)


def test_density_rejects_unsorted_times():
    with pytest.raises(ValueError):
        SpaceTimeDensity(np.array([0.0, 0.0]), np.zeros((2, 2, 2)), 1.0, 1.0)


def test_field_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    g = grid(4, 6)
    u = VelocityField(g, rng.standard_normal((4, 6)), rng.standard_normal((4, 7)))
    save_field(tmp_path / "u", u)
    v = load_field(tmp_path / "u")
    assert v.grid == g
    np.testing.assert_array_equal(v.u1, u.u1)
    np.testing.assert_array_equal(v.u2, u.u2)
    s = ScalarField(g, rng.standard_normal((4, 6)))
    save_field(tmp_path / "s", s)
    np.testing.assert_array_equal(load_field(tmp_path / "s").values, s.values)
