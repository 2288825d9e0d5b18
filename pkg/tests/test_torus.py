import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblelab.models import BubbleParams, rho_field
from bubblelab.torus import (
    Grid,
    TorusPoint,
    geodesic_distance,
    grad,
    grad_adjoint,
    integrate,
    laplacian,
    laplacian_symbol,
    wrap_displacement,
)

coord = st.floats(min_value=-3, max_value=3, allow_nan=False)


def sample(n, f):
    X, Y = Grid(n).coords()
    return f(X, Y)


@pytest.mark.parametrize(
    "p, a, expected",
    [
        ((0.3, 0.7), (0.1, 0.9), (0.2, -0.2)),
        ((0.4, 0.4), (0.4, 0.4), (0.0, 0.0)),
        ((0.95, 0.0), (0.05, 0.0), (-0.1, 0.0)),
    ],
)
def test_wrap_displacement(p, a, expected):
    d = wrap_displacement(TorusPoint(*p), TorusPoint(*a))
    assert d.dx == pytest.approx(expected[0], abs=1e-14)
    assert d.dy == pytest.approx(expected[1], abs=1e-14)


def test_torus_point_reduced_mod_one():
    p = TorusPoint(1.25, -0.25)
    assert (p.x, p.y) == (0.25, 0.75)


@given(coord, coord, coord, coord)
def test_wrap_is_antisymmetric_off_the_seam(px, py, ax, ay):
    p, a = TorusPoint(px, py), TorusPoint(ax, ay)
    d1 = wrap_displacement(p, a)
    d2 = wrap_displacement(a, p)
    assert -0.5 < d1.dx <= 0.5 and -0.5 < d1.dy <= 0.5
    if abs(abs(d1.dx) - 0.5) > 1e-12:
        assert d1.dx == pytest.approx(-d2.dx, abs=1e-12)
    if abs(abs(d1.dy) - 0.5) > 1e-12:
        assert d1.dy == pytest.approx(-d2.dy, abs=1e-12)


@pytest.mark.parametrize(
    "p, q, expected",
    [((0, 0), (0.5, 0), 0.5), ((0, 0), (0.9, 0.9), np.sqrt(0.02)), ((0.3, 0.3), (0.3, 0.3), 0.0)],
)
def test_geodesic_distance(p, q, expected):
    assert geodesic_distance(TorusPoint(*p), TorusPoint(*q)) == pytest.approx(expected, abs=1e-14)


@given(coord, coord, coord, coord)
def test_geodesic_distance_bounded(px, py, qx, qy):
    assert geodesic_distance(TorusPoint(px, py), TorusPoint(qx, qy)) <= np.sqrt(2) / 2 + 1e-15


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        Grid(100)


def test_grad_of_sine_within_taylor_bound():
    n = 128
    h = 1 / n
    f = sample(n, lambda x, y: np.sin(2 * np.pi * x))
    err = np.max(np.abs(grad(f)[..., 0] - sample(n, lambda x, y: 2 * np.pi * np.cos(2 * np.pi * x))))
    assert err <= (2 * np.pi) ** 3 * h**2 / 6
    assert np.max(np.abs(grad(f)[..., 1])) == 0


def test_grad_of_constant_is_zero():
    assert not np.any(grad(np.full((64, 64), 3.7)))


def test_grad_product_mode():
    n = 256
    f = sample(n, lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y))
    exact = sample(n, lambda x, y: 2 * np.pi * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y))
    assert np.max(np.abs(grad(f)[..., 0] - exact)) <= 1e-3


def test_laplacian_of_sine():
    n = 128
    h = 1 / n
    f = sample(n, lambda x, y: np.sin(2 * np.pi * x))
    err = np.max(np.abs(laplacian(f) + 4 * np.pi**2 * f))
    assert err <= (2 * np.pi) ** 4 * h**2 / 12 + 1e-9
    assert not np.any(laplacian(np.ones((32, 32))))


@pytest.mark.parametrize("n", [64, 256, 1024])
def test_laplacian_symbol_matches_stencil(n):
    h = 1 / n
    f = sample(n, lambda x, y: np.cos(2 * np.pi * x))
    expected = -(2 - 2 * np.cos(2 * np.pi * h)) / h**2
    ratio = laplacian(f)[f != 0] / f[f != 0]
    np.testing.assert_allclose(ratio[np.abs(f[f != 0]) > 0.1], expected, rtol=1e-9)
    assert laplacian_symbol(n)[1, 0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(-4 * np.pi**2, rel=(2 * np.pi * h) ** 2 / 12 + 1e-12)


def test_integrate_exact_cases():
    assert integrate(np.ones((64, 64))) == 1.0
    assert abs(integrate(sample(64, lambda x, y: np.sin(2 * np.pi * x)))) < 1e-15


def test_integrate_rho_squared_against_radial_quadrature():
    lam, iota = 8.0, 0.25
    params = BubbleParams(TorusPoint(0.5, 0.5), lam)
    grid_value = integrate(rho_field(params, Grid(256)) ** 2)
    # 2048-node Gauss-Legendre on the disc plus the constant plateau outside it
    s, w = np.polynomial.legendre.leggauss(2048)
    r = 0.5 * iota * (s + 1)
    disc = np.sum(0.5 * iota * w * 2 * np.pi * r * (lam / (1 + lam**2 * r**2)) ** 2)
    plateau = (1 - np.pi * iota**2) * (lam / (1 + lam**2 * iota**2)) ** 2
    assert grid_value == pytest.approx(disc + plateau, rel=1e-2)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_summation_by_parts(seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((16, 16))
    g = rng.standard_normal((16, 16, 2))
    lhs = np.sum(grad(f) * g)
    rhs = np.sum(f * grad_adjoint(g))
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_laplacian_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    f, g = rng.standard_normal((2, 32, 32))
    a, b = np.sum(f * laplacian(g)), np.sum(g * laplacian(f))
    assert a == pytest.approx(b, rel=1e-11, abs=1e-6)
