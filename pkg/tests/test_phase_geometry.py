from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughwave import phase_geometry as pg
from roughwave import sphere
from roughwave.errors import AmbiguousMaximizerError

coord = st.floats(-1.0, 1.0, allow_nan=False)
point = st.tuples(coord, coord, coord)


class SquareOptics:
    """u = -t + (x . omega)^2: for x = 0, y = e_z the phase has equal maxima at +-e_z."""

    def evaluate(self, t, x, omega, derivs=False, chart=None):
        omega = np.atleast_2d(omega)
        x = np.broadcast_to(np.asarray(x, dtype=float), omega.shape)
        d = np.sum(x * omega, axis=1)
        out = SimpleNamespace(u=-float(t) + d**2)
        if derivs:
            e = sphere.frame(omega, chart)
            out.domega_u = 2.0 * d[:, None] * np.einsum("nai,ni->na", e, x)
        return out


@given(st.floats(0.0, 0.4), st.floats(0.3, 0.6), point, point)
def test_flat_decomposition_closed_form(flat_optics, t, gap, x, y):
    x, y = np.array(x), np.array(y)
    r = np.linalg.norm(y - x)
    if r < 1e-2 or abs(r - gap) < 1e-3:
        return
    dec = pg.decompose(flat_optics, pg.PhasePair(t, x, t + gap, y))
    assert dec.m0 == pytest.approx(r - gap, abs=1e-12)
    assert np.allclose(dec.omega0, (y - x) / r, atol=1e-7)
    assert dec.region == ("Interior" if r < gap else "Exterior")


def test_flat_theta1_closed_form(flat_optics):
    pair = pg.PhasePair(0.1, (0.0, 0.0, 0.0), 0.5, (0.3, 0.5, -0.2))
    dec = pg.decompose(flat_optics, pair)
    r = np.linalg.norm(pair.ya)
    assert dec.region == "Exterior"
    assert np.allclose(dec.theta1, np.arccos(0.4 / r), atol=1e-12)
    assert np.allclose(pg.phase(flat_optics, pair, dec.omega1), 0.0, atol=1e-12)


def test_coincident_points_are_degenerate(flat_optics):
    dec = pg.decompose(flat_optics, pg.PhasePair(0.0, (0.1, 0.2, 0.3), 0.5, (0.1, 0.2, 0.3)))
    assert dec.degenerate and dec.region == "Interior"
    assert dec.m0 == pytest.approx(-0.5, abs=1e-15)


def test_on_cone_pair(flat_optics):
    w = sphere.normalize(np.array([1.0, -1.0, 0.5]))
    dec = pg.decompose(flat_optics, pg.PhasePair(0.2, (0, 0, 0), 0.8, tuple(0.6 * w)))
    assert dec.region == "OnS"


def test_perturbed_on_cone_pair(bump_solver):
    w = sphere.normalize(np.array([0.3, 0.2, -0.9]))
    x = np.array([0.1, -0.2, 0.0])
    y = bump_solver.ray_point(0.1, x, w, 0.9)[0]
    dec = pg.decompose(bump_solver, pg.PhasePair(0.1, x, 0.9, y))
    assert dec.region == "OnS"
    assert abs(dec.m0) < 1e-9
    assert np.allclose(dec.omega0, w, atol=1e-5)


def test_ambiguous_maximizer_raises():
    with pytest.raises(AmbiguousMaximizerError):
        pg.decompose(SquareOptics(), pg.PhasePair(0.0, (0, 0, 0), 0.5, (0, 0, 1.0)))


def test_pair_validation():
    with pytest.raises(ValueError):
        pg.PhasePair(0.5, (0, 0, 0), 0.4, (0, 0, 0))


@pytest.mark.parametrize("region,y", [("Interior", (0.1, 0.2, 0.0)), ("Exterior", (0.6, 0.4, 0.1))])
def test_key_lemma_bounds_hold(flat_optics, bump_solver, rng, region, y):
    for optics in (flat_optics, bump_solver):
        dec = pg.decompose(optics, pg.PhasePair(0.1, (0, 0, 0), 0.6, y))
        assert dec.region == region
        samples = pg.check_key_lemma(optics, dec, sphere.random_directions(rng, 60))
        assert all(s.margin >= -1e-8 * dec.pair.gap for s in samples if s.case != "ExtNear")


def test_flat_on_cone_phase_is_quadratic(flat_optics, rng):
    w0 = sphere.normalize(np.array([0.2, 0.9, -0.1]))
    pair = pg.PhasePair(0.0, (0, 0, 0), 0.7, tuple(0.7 * w0))
    dec = pg.decompose(flat_optics, pair)
    om = sphere.random_directions(rng, 50)
    phi = pg.phase(flat_optics, pair, om)
    assert np.allclose(phi, 0.5 * 0.7 * np.sum((om - dec.omega0) ** 2, axis=1), atol=1e-12)


def test_case4_constant_fit(flat_optics, rng):
    dec = pg.decompose(flat_optics, pg.PhasePair(0.0, (0, 0, 0), 0.5, (0.7, 0.2, 0.0)))
    om = sphere.from_axis_angles(dec.omega0, rng.uniform(0, 0.5, 80), rng.uniform(0, 2 * np.pi, 80))
    samples = pg.check_key_lemma(flat_optics, dec, om)
    c4 = pg.fit_case4_constant(samples)
    assert 0.3 < c4 < 2.0
    near = [s for s in samples if s.case == "ExtNear"]
    assert near and all(abs(s.phi_value) >= c4 * s.shape - 1e-12 for s in near)


@pytest.mark.parametrize("eps_fixture", ["flat_solver", "bump_solver"])
def test_connecting_curves_hit_target(request, eps_fixture):
    optics = request.getfixturevalue(eps_fixture)
    inner = pg.decompose(optics, pg.PhasePair(0.1, (0, 0, 0), 0.7, (0.2, 0.1, -0.1)))
    mu = pg.integrate_mu(optics, inner.pair, inner)
    assert mu.endpoint_defect < 1e-6 and mu.u_defect < 1e-6 and mu.domega_u_defect < 1e-6
    outer = pg.decompose(optics, pg.PhasePair(0.1, (0, 0, 0), 0.6, (0.6, 0.3, 0.1)))
    eta = pg.integrate_eta(optics, outer.pair, outer, outer.omega1[3])
    assert eta.endpoint_defect < 1e-6 and eta.u_defect < 1e-6 and eta.domega_u_defect < 1e-6
