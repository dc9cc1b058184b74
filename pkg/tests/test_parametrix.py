import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from roughwave import parametrix as pm
from roughwave.errors import UnderresolvedError
from roughwave.parametrix import DyadicWindow, FrequencyProfile, RadialFlat


def _quad_radial(j, t, r):
    """phi_j(t, r) for f = 1 from the sphere average 4 pi sin(lam r) / (lam r)."""
    c = 2.0**j

    def integrand(lam, part):
        v = pm.psi(lam / c) * lam**2 * 4 * np.pi * np.sinc(lam * r / np.pi) * np.exp(-1j * lam * t)
        return v.real if part == 0 else v.imag

    lo, hi = 0.5 * c, 2.0 * c
    re = integrate.quad(integrand, lo, hi, args=(0,), limit=400, epsabs=1e-13, epsrel=1e-13)[0]
    im = integrate.quad(integrand, lo, hi, args=(1,), limit=400, epsabs=1e-13, epsrel=1e-13)[0]
    return re + 1j * im


def test_psi_support_and_peak():
    lam = np.linspace(0, 3, 3001)
    v = pm.psi(lam)
    assert np.all(v[(lam <= 0.5) | (lam >= 2.0)] == 0.0)
    assert np.all(v[(lam > 0.5) & (lam < 2.0)] > 0.0)
    assert pm.psi(1.25) == pytest.approx(1.0, abs=1e-15)
    assert lam[np.argmax(v)] == pytest.approx(1.25, abs=1e-3)


def test_psi_is_flat_at_endpoints():
    # all derivatives vanish: psi(1/2 + h) decays faster than any power of h
    for h in (1e-2, 5e-3):
        assert pm.psi(0.5 + h) < h**8
        assert pm.psi(2.0 - h) < h**8


def test_lambda_nodes():
    # the aliasing margin alone needs ceil(1.5 * 540 / (2 pi)) = 129 intervals
    assert pm.lambda_nodes(0.0) == 129
    assert pm.lambda_nodes(0.0, n_min=200) == 200
    assert pm.lambda_nodes(1000.0) == int(np.ceil(1.5 * 1540 / (2 * np.pi)))
    assert pm.lambda_nodes(1000.0, n_min=1000) == 1000


@pytest.mark.parametrize("j", [0, 2, 5])
def test_window_rule_and_data_norm(j):
    w = DyadicWindow(j)
    lam, wt = w.rule(400)
    assert lam[0] == 0.5 * 2**j and lam[-1] == 2.0 * 2**j
    ref = integrate.quad(lambda s: pm.psi(s / 2**j) ** 2 * s**2, 0.5 * 2**j, 2 * 2**j, epsabs=0, epsrel=1e-13)[0]
    assert FrequencyProfile.radial_one().data_norm(w) == pytest.approx(np.sqrt(4 * np.pi * ref), rel=1e-12)


def test_window_rejects_negative_level():
    with pytest.raises(ValueError):
        DyadicWindow(-1)


def test_profiles():
    assert FrequencyProfile.from_name("harmonic_2_-1").angular_l2 == 1.0
    with pytest.raises(ValueError):
        FrequencyProfile.harmonic(5, 0)
    with pytest.raises(ValueError):
        FrequencyProfile.from_name("gaussian")
    # harmonic normalization on the sphere
    from roughwave import sphere

    rule = sphere.SphereRule(16)
    y = FrequencyProfile.harmonic(3, 2).angular(rule.nodes)
    assert rule.integrate(y**2) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("j,t,r", [(0, 0.3, 0.7), (2, 0.5, 0.25), (3, 0.9, 1.3)])
def test_radial_reduction_matches_quadrature_oracle(j, t, r):
    rf = RadialFlat(DyadicWindow(j))
    assert rf.value(t, r) == pytest.approx(_quad_radial(j, t, r), rel=1e-9, abs=1e-12 * 8**j)


def test_radial_reduction_origin_limit():
    rf = RadialFlat(DyadicWindow(2))
    assert rf.value(0.4, 0.0) == pytest.approx(rf.value(0.4, 1e-6), rel=1e-8)


@pytest.mark.parametrize("j", [0, 2])
def test_sphere_quadrature_matches_radial_reduction(flat_optics, rng, j):
    t = rng.uniform(0.1, 0.9, 5)
    x = rng.uniform(-0.8, 0.8, (5, 3))
    win = DyadicWindow(j)
    vals, info = pm.parametrix_at(flat_optics, win, FrequencyProfile.radial_one(), t, x)
    ref = RadialFlat(win).value(t, np.linalg.norm(x, axis=1))
    assert np.max(np.abs(vals - ref)) <= 1e-9 * np.max(np.abs(ref))
    assert info["rel_change"] < 1e-3


def test_radial_derivatives_match_finite_differences():
    rf = RadialFlat(DyadicWindow(2))
    t, r, h = 0.45, 0.6, 1e-4
    phi, d1, d2 = rf.derivatives(t, r)
    v = lambda rr: rf.derivatives(t, rr)[0]
    assert d1 == pytest.approx((v(r + h) - v(r - h)) / (2 * h), rel=1e-6)
    assert d2 == pytest.approx((v(r + h) - 2 * phi + v(r - h)) / h**2, rel=1e-5)


def test_slab_matches_pointwise_derivatives():
    rf = RadialFlat(DyadicWindow(3), span=5.0)
    delta, nt, nr = 1 / 64, 64, 40
    phi, d1, d2 = rf.slab(delta, nt, nr, t_rows=[0, 17, 63])
    t = (np.array([0, 17, 63]) + 0.5)[:, None] * delta
    r = (np.arange(nr) + 0.5)[None, :] * delta
    ref = rf.derivatives(t, r)
    for a, b in zip((phi, d1, d2), ref):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-9 * np.max(np.abs(b)))


@pytest.mark.parametrize("fixture", ["flat_optics", "bump_solver"])
def test_gradient_and_hessian_match_finite_differences(request, fixture):
    optics = request.getfixturevalue(fixture)
    win = DyadicWindow(1)
    prof = FrequencyProfile.harmonic(1, 1)
    t = np.array([0.4, 0.7])
    x = np.array([[0.2, -0.1, 0.3], [-0.4, 0.2, 0.1]])
    kw = dict(degree=60, n_lam=256, check=False)
    grad, _ = pm.parametrix_at(optics, win, prof, t, x, order=1, **kw)
    hess, _ = pm.parametrix_at(optics, win, prof, t, x, order=2, **kw)
    h = 1e-4
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        vp, _ = pm.parametrix_at(optics, win, prof, t, x + e, **kw)
        vm, _ = pm.parametrix_at(optics, win, prof, t, x - e, **kw)
        assert np.allclose(grad[:, k], (vp - vm) / (2 * h), rtol=1e-6, atol=1e-6 * np.max(np.abs(grad)))
        gp, _ = pm.parametrix_at(optics, win, prof, t, x + e, order=1, **kw)
        gm, _ = pm.parametrix_at(optics, win, prof, t, x - e, order=1, **kw)
        assert np.allclose(hess[:, :, k], (gp - gm) / (2 * h), rtol=1e-5, atol=1e-6 * np.max(np.abs(hess)))


def test_zero_profile_gives_zero(bump_solver):
    vals, _ = pm.parametrix_at(bump_solver, DyadicWindow(1), FrequencyProfile.zero(), [0.5], [[0.1, 0.2, 0.3]],
                               order=2, check=False, degree=30, n_lam=128)
    assert np.all(vals == 0)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_in_the_profile(a, b):
    from roughwave import eikonal, metric

    optics = eikonal.optics_for(metric.minkowski())
    y1, y2 = FrequencyProfile.harmonic(1, 0), FrequencyProfile.harmonic(2, 1)
    combo = FrequencyProfile("combo", y1.radial, lambda w: a * y1.angular(w) + b * y2.angular(w), 1.0)
    t, x = np.array([0.3, 0.6]), np.array([[0.1, 0.2, -0.3], [0.5, -0.2, 0.0]])
    kw = dict(degree=40, n_lam=128, check=False)
    v1, _ = pm.parametrix_at(optics, DyadicWindow(1), y1, t, x, **kw)
    v2, _ = pm.parametrix_at(optics, DyadicWindow(1), y2, t, x, **kw)
    vc, _ = pm.parametrix_at(optics, DyadicWindow(1), combo, t, x, **kw)
    assert np.allclose(vc, a * v1 + b * v2, atol=1e-11 * (1 + abs(a) + abs(b)))
    vs, _ = pm.parametrix_at(optics, DyadicWindow(1), y1.scaled(a), t, x, **kw)
    assert np.allclose(vs, a * v1, atol=1e-12 * (1 + abs(a)))


def test_underresolved_rule_is_reported(flat_optics):
    with pytest.raises(UnderresolvedError):
        pm.parametrix_at(flat_optics, DyadicWindow(4), FrequencyProfile.radial_one(), [0.5], [[0.9, 0.0, 0.0]],
                         degree=4, n_lam=16)


def test_grid_evaluation_shapes(flat_optics):
    t = np.array([0.2, 0.5])
    x = np.array([[0.0, 0.0, 0.1], [0.3, 0.0, 0.0], [0.0, 0.2, 0.2]])
    grid = (t, np.full(2, 0.5), x, np.ones(3))
    prof = FrequencyProfile.radial_one()
    s0 = pm.eval_parametrix(flat_optics, DyadicWindow(0), prof, grid)
    s1 = pm.eval_gradient(flat_optics, DyadicWindow(0), prof, grid)
    s2 = pm.eval_hessian(flat_optics, DyadicWindow(0), prof, grid)
    assert s0.values.shape == (2, 3) and s1.values.shape == (2, 3, 3) and s2.values.shape == (2, 3, 3, 3)
    assert s2.magnitude().shape == (2, 3)
    rf = RadialFlat(DyadicWindow(0))
    r = np.linalg.norm(x, axis=1)
    assert np.allclose(s1.magnitude(), rf.gradient_norm(t[:, None], r[None]), rtol=1e-8)
    assert np.allclose(s2.magnitude(), rf.hessian_norm(t[:, None], r[None]), rtol=1e-8)
