import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from bubblelab.energy import (
    ExpansionInputs,
    NotOnSphereError,
    TangencyError,
    degree,
    el_residual,
    energy,
    energy_parts,
    expansion_dA,
    expansion_dlambda,
    expansion_energy,
    first_variation,
    jacobian_degree,
    predicted_lambda,
    second_variation,
    spectral_energy_parts,
)
from bubblelab.minimize import retract
from bubblelab.models import BubbleParams, build_z, project_tangent
from bubblelab.torus import Grid, TorusPoint
from bubblelab.verify import random_smooth_field

CENTER = TorusPoint(0.5, 0.5)
J = -2 * np.pi


def random_sphere_field(n, rng):
    u = random_smooth_field(Grid(n), rng) + rng.standard_normal(3)
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def random_tangent(u, rng):
    return project_tangent(u, random_smooth_field(Grid(u.shape[0]), rng))


def test_constant_map_has_zero_energy_and_degree():
    u = np.zeros((64, 64, 3))
    u[..., 2] = 1
    assert energy(u, 0.3).total == 0
    assert not np.any(el_residual(u, 0.3))
    assert degree(u) == 0
    V = project_tangent(u, np.random.default_rng(0).standard_normal(u.shape))
    assert first_variation(u, 0.3, V) == 0


def test_energy_rejects_non_unit_fields():
    with pytest.raises(NotOnSphereError):
        energy(np.ones((16, 16, 3)), 0.1)


def test_breakdown_total():
    u = random_sphere_field(32, np.random.default_rng(1))
    e = energy(u, 0.01)
    d, b = energy_parts(u)
    assert (e.dirichlet, e.biharmonic) == (d, b)
    assert e.total == d + 0.01 * b
    assert e.dirichlet >= 0 and e.biharmonic >= 0


def test_model_energy_at_lam16_fine_grid():
    z = build_z(BubbleParams(CENTER, 16.0), Grid(2048)).u
    e = energy(z, 0.0)
    assert e.dirichlet == pytest.approx(4 * np.pi + 8 * np.pi**2 / 256, abs=0.02)
    assert e.biharmonic == pytest.approx(0.5 * (64 * np.pi / 3) * 256, rel=0.05)


def test_spectral_quadrature_on_single_mode():
    # u = (cos 2 pi x, sin 2 pi x, 0): |grad u|^2 = 4 pi^2, |Delta u|^2 = 16 pi^4
    X, _ = Grid(32).coords()
    u = np.stack([np.cos(2 * np.pi * X), np.sin(2 * np.pi * X), 0 * X], -1)
    d, b = spectral_energy_parts(u)
    assert d == pytest.approx(2 * np.pi**2, rel=1e-13)
    assert b == pytest.approx(8 * np.pi**4, rel=1e-13)


@pytest.mark.parametrize("seed", range(20))
def test_first_variation_matches_difference_quotient(seed):
    rng = np.random.default_rng(seed)
    eps = 10.0 ** rng.uniform(-5, -2)
    u = random_sphere_field(32, rng)
    # a share of the residual keeps dE[V] away from zero, where a relative check is meaningless
    r = el_residual(u, eps)
    V = random_tangent(u, rng) + r / np.max(np.abs(r))
    t = 1e-5
    fd = (energy(retract(u, V, t), eps).total - energy(retract(u, V, -t), eps).total) / (2 * t)
    assert first_variation(u, eps, V) == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_second_variation_matches_second_difference(seed):
    rng = np.random.default_rng(100 + seed)
    eps = 10.0 ** rng.uniform(-5, -2)
    u = random_sphere_field(32, rng)
    V = random_tangent(u, rng)
    t = 1e-4
    e = [energy(retract(u, V, s), eps).total for s in (-t, 0.0, t)]
    fd = (e[0] - 2 * e[1] + e[2]) / t**2
    assert second_variation(u, eps, V, V) == pytest.approx(fd, rel=1e-4)


def test_second_variation_symmetric():
    rng = np.random.default_rng(5)
    u = random_sphere_field(32, rng)
    V, W = random_tangent(u, rng), random_tangent(u, rng)
    a, b = second_variation(u, 1e-3, V, W), second_variation(u, 1e-3, W, V)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_variations_reject_non_tangent_fields():
    rng = np.random.default_rng(6)
    u = random_sphere_field(16, rng)
    with pytest.raises(TangencyError):
        first_variation(u, 0.0, u)
    with pytest.raises(TangencyError):
        second_variation(u, 0.0, u, random_tangent(u, rng))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 1e-2))
def test_residual_is_adjoint_of_first_variation(seed, eps):
    rng = np.random.default_rng(seed)
    u = random_sphere_field(32, rng)
    V = random_tangent(u, rng)
    r = el_residual(u, eps)
    assert np.max(np.abs(np.sum(r * u, axis=-1))) < 1e-10 * max(1.0, np.max(np.abs(r)))
    lhs = np.mean(np.sum(r * V, axis=-1))
    assert lhs == pytest.approx(first_variation(u, eps, V), rel=1e-10, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_energy_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    u = random_sphere_field(32, rng)
    R = Rotation.random(random_state=seed).as_matrix()
    a, b = energy(u, 1e-3), energy(u @ R.T, 1e-3)
    assert b.dirichlet == pytest.approx(a.dirichlet, rel=1e-13)
    assert b.biharmonic == pytest.approx(a.biharmonic, rel=1e-13)


def test_degree_of_models():
    grid = Grid(512)
    z = build_z(BubbleParams(CENTER, 16.0), grid).u
    assert degree(z) == pytest.approx(1.0, abs=1e-6)
    F = np.diag([1.0, 1.0, -1.0])
    assert degree(build_z(BubbleParams(CENTER, 16.0, F), grid).u) == pytest.approx(-1.0, abs=1e-6)
    # the central-difference Jacobian integral is only second-order accurate in lam h
    assert jacobian_degree(z) == pytest.approx(1.0, abs=2e-3)


def test_expansion_energy_examples():
    assert expansion_energy(ExpansionInputs(0.0, 5.0)) == 4 * np.pi
    assert expansion_energy(ExpansionInputs(J, 16.0)) == pytest.approx(4 * np.pi + 8 * np.pi**2 / 256, rel=1e-15)
    assert expansion_energy(ExpansionInputs(J, 16.0)) == pytest.approx(12.8748, abs=1e-4)
    assert expansion_energy(ExpansionInputs(J, 20.0, 1e-5)) == pytest.approx(12.89780, abs=1e-5)
    assert expansion_energy(ExpansionInputs(J, 20.0, 1e-5, 4)) < expansion_energy(ExpansionInputs(J, 20.0, 1e-5))


def test_expansion_dlambda_examples():
    assert expansion_dlambda(ExpansionInputs(J, 20.0, 1e-5)) == pytest.approx(-0.006335, abs=1e-6)
    for c in (1, 4):
        lam = predicted_lambda(1e-5, J, c)
        assert abs(expansion_dlambda(ExpansionInputs(J, lam, 1e-5, c))) < 1e-12


def test_expansion_dA():
    assert expansion_dA(0.0, 16.0) == 0.0
    assert expansion_dA(2.0, 7.0) == 2 * expansion_dA(1.0, 7.0)
    assert expansion_dA(1.0, 7.0) == pytest.approx(4 * expansion_dA(1.0, 14.0), rel=1e-15)


def test_predicted_lambda():
    assert predicted_lambda(1e-5, J) == pytest.approx(22.03, abs=0.01)
    assert predicted_lambda(1e-5 / 16, J) == pytest.approx(2 * predicted_lambda(1e-5, J), rel=1e-14)
    with pytest.raises(ValueError):
        predicted_lambda(1e-5, 0.0)
    with pytest.raises(ValueError):
        predicted_lambda(0.0, J)


def test_expansion_inputs_validation():
    with pytest.raises(ValueError):
        ExpansionInputs(J, 16.0, c_gamma=2)
    with pytest.raises(ValueError):
        ExpansionInputs(J, 0.5)
    with pytest.raises(ValueError):
        ExpansionInputs(J, 16.0, epsilon=-1.0)
