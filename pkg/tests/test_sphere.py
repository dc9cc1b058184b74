import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughwave import sphere

angle = st.floats(0.0, np.pi, allow_nan=False)
azimuth = st.floats(0.0, 2 * np.pi, exclude_max=True, allow_nan=False)
vec = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@pytest.mark.parametrize("degree", [4, 9, 20])
def test_rule_integrates_low_degree_polynomials(degree):
    rule = sphere.SphereRule(degree, pole=(0.3, -0.4, 0.5))
    x, y, z = rule.nodes.T
    assert rule.integrate(np.ones(len(rule))) == pytest.approx(4 * np.pi, rel=1e-14)
    assert rule.integrate(x**2) == pytest.approx(4 * np.pi / 3, rel=1e-13)
    assert rule.integrate(x**2 * y**2) == pytest.approx(4 * np.pi / 15, rel=1e-13)
    assert abs(rule.integrate(x * y * z)) < 1e-14


def test_rule_resolves_plane_wave():
    # int_{S^2} e^{i k omega_z} = 4 pi sin(k) / k
    k = 30.0
    rule = sphere.SphereRule(sphere.sphere_degree(k))
    val = rule.integrate(np.exp(1j * k * rule.nodes[:, 2]))
    assert val == pytest.approx(4 * np.pi * np.sin(k) / k, abs=1e-12)


@given(vec)
def test_frame_is_orthonormal(v):
    w = sphere.normalize(np.array(v))[None]
    e = sphere.frame(w)[0]
    M = np.vstack([w, e])
    assert np.allclose(M @ M.T, np.eye(3), atol=1e-14)


@given(vec, st.floats(1e-3, np.pi - 1e-3), azimuth)
def test_axis_angle_round_trip(v, theta, phi):
    axis = sphere.normalize(np.array(v))
    w = sphere.from_axis_angles(axis, np.array([theta]), np.array([phi]))
    th, ph = sphere.axis_angles(axis, w)
    assert th[0] == pytest.approx(theta, abs=1e-9)
    dphi = np.angle(np.exp(1j * (ph[0] - phi)))
    assert abs(dphi) < 1e-9


def test_random_directions_are_unit(rng):
    w = sphere.random_directions(rng, 100)
    assert np.allclose(np.linalg.norm(w, axis=1), 1.0)


def test_icosahedral_grid_sizes():
    assert len(sphere.icosahedral_grid(0)) == 12
    assert len(sphere.icosahedral_grid(1)) == 42
    assert len(sphere.icosahedral_neighbors(0)[0]) == 5


def test_sphere_degree_is_monotone():
    d = [sphere.sphere_degree(b) for b in np.linspace(0, 200, 41)]
    assert all(a <= b for a, b in zip(d, d[1:]))
