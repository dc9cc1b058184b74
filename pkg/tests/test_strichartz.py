import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from roughwave import strichartz as sz
from roughwave.errors import AdmissibilityError
from roughwave.parametrix import FieldSample, FrequencyProfile


@pytest.mark.parametrize("p,q,r", [
    (4, 4, Fraction(1, 2)),
    ("inf", 2, Fraction(0)),
    (math.inf, 2, Fraction(0)),
    (8, 8 / 3, Fraction(1, 4)),
    (2, "inf", None),
])
def test_admissible_examples(p, q, r):
    if r is None:
        with pytest.raises(AdmissibilityError, match="q = inf"):
            sz.admissible(p, q)
        return
    pair = sz.admissible(p, q)
    assert pair.r == r


@pytest.mark.parametrize("p,q,msg", [(1.5, 8, "p < 2"), (4, 1, "q < 2"), (3, 3, "1/p")])
def test_inadmissible_pairs(p, q, msg):
    with pytest.raises(AdmissibilityError, match=msg):
        sz.admissible(p, q)


def test_admissibility_error_is_value_error():
    with pytest.raises(ValueError):
        sz.admissible(2, 2)


@given(st.integers(2, 40), st.integers(2, 40))
def test_admissibility_rule_is_exact(p, q):
    ok = Fraction(1, p) + Fraction(1, q) <= Fraction(1, 2)
    if ok:
        pair = sz.admissible(p, q)
        assert pair.r == Fraction(3, 2) - Fraction(1, p) - Fraction(3, q)
        assert pair.to_dict()["r"] == str(pair.r)
    else:
        with pytest.raises(AdmissibilityError):
            sz.admissible(p, q)


def _sample(values, tw, xw):
    return FieldSample(np.arange(len(tw)), np.asarray(tw), np.zeros((len(xw), 3)), np.asarray(xw),
                       np.asarray(values), 0, 0)


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.sampled_from([(4, 4), ("inf", 2), (8, 8 / 3), (6, 3)]))
def test_mixed_norm_of_constant(T, V, pq):
    pair = sz.admissible(*pq)
    s = _sample(np.ones((5, 7)), np.full(5, T / 5), np.full(7, V / 7))
    p = pair.p_float
    expect = V ** (1 / pair.q_float) * (1.0 if p == math.inf else T ** (1 / p))
    assert sz.mixed_norm(s, pair) == pytest.approx(expect, rel=1e-12)


@given(st.lists(st.floats(0, 10), min_size=12, max_size=12), st.lists(st.floats(0, 1), min_size=12, max_size=12))
def test_mixed_norm_is_monotone(a, b):
    f = np.array(a).reshape(3, 4)
    g = f + np.array(b).reshape(3, 4)
    pair = sz.admissible(4, 4)
    tw, xw = np.full(3, 0.5), np.full(4, 0.25)
    assert sz.mixed_norm(_sample(f, tw, xw), pair) <= sz.mixed_norm(_sample(g, tw, xw), pair) * (1 + 1e-12)


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_mixed_norm_is_homogeneous(c):
    rng = np.random.default_rng(0)
    f = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    pair = sz.admissible(6, 3)
    tw, xw = np.full(3, 1 / 3), np.full(5, 0.2)
    assert sz.mixed_norm(_sample(c * f, tw, xw), pair) == pytest.approx(abs(c) * sz.mixed_norm(_sample(f, tw, xw), pair))


def test_equal_exponents_reduce_to_spacetime_norm():
    rng = np.random.default_rng(1)
    s = _sample(rng.standard_normal((4, 6)), rng.uniform(0.1, 1, 4), rng.uniform(0.1, 1, 6))
    assert sz.mixed_norm(s, sz.admissible(4, 4)) == pytest.approx(sz.spacetime_norm(s, 4), rel=1e-13)


def test_gradient_magnitude_uses_components():
    v = np.zeros((1, 1, 3), dtype=complex)
    v[0, 0] = [3, 4j, 0]
    s = FieldSample(np.zeros(1), np.ones(1), np.zeros((1, 3)), np.ones(1), v, 1, 0)
    assert s.magnitude()[0, 0] == pytest.approx(5.0)


def test_radial_norms_converge_in_grid():
    pair = sz.admissible(4, 4)
    a = sz.radial_flat_norms(3, pair, cells_per_scale=8)
    b = sz.radial_flat_norms(3, pair, cells_per_scale=16)
    for k in ("value", "gradient", "hessian"):
        assert a[k] == pytest.approx(b[k], rel=1e-5)
    assert a["tail"] < 1e-5  # share of the L^q mass beyond half the box


def test_radial_norms_match_full_quadrature(flat_optics):
    # coarse explicit grid: both routes see the same Riemann sum
    pair = sz.admissible(4, 4)
    from roughwave.parametrix import DyadicWindow, RadialFlat, eval_parametrix

    t = np.array([0.25, 0.75])
    r = np.array([0.1, 0.3, 0.5])
    x = np.column_stack([r, np.zeros(3), np.zeros(3)])
    grid = (t, np.full(2, 0.5), x, 4 * np.pi * r**2 * 0.2)
    s = eval_parametrix(flat_optics, DyadicWindow(1), FrequencyProfile.radial_one(), grid)
    rf = RadialFlat(DyadicWindow(1))
    ref = _sample(rf.value(t[:, None], r[None]), grid[1], grid[3])
    assert sz.mixed_norm(s, pair) == pytest.approx(sz.mixed_norm(ref, pair), rel=1e-9)


def test_scaling_regression_slopes():
    reps = sz.scaling_regression([3, 4, 5], sz.admissible(4, 4))
    for qty, target in (("value", 0.5), ("gradient", 1.5), ("hessian", 2.5)):
        assert reps[qty].target_r == target
        assert reps[qty].slope <= target + 0.1
        assert reps[qty].slope == pytest.approx(target, abs=0.02)


def test_scaling_regression_rejects_perturbed_radial(bump_solver):
    with pytest.raises(ValueError):
        sz.scaling_regression([3, 4], sz.admissible(4, 4), optics=bump_solver)
