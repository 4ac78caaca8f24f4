import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from wasep.gridfunc import (
    GridFunction,
    GridPath,
    SpaceTimeGridFunction,
    compact_bump,
    gaussian_bump,
    mollifier_width,
    ramp_G,
    smooth_ramp_G,
)


def quad_l2(f, g, lo, hi, points=()):
    val, _ = quad(lambda u: float(f(u)) * float(g(u)), lo, hi, points=list(points) or None,
                  limit=500, epsabs=1e-13, epsrel=1e-12)
    return val


def test_ramp_values():
    G = ramp_G(3)
    assert G(0.0) == 1.0
    assert G(3.0) == 0.0
    assert G(-1e-12) == 0.0
    assert G(1.5) == pytest.approx(0.5)
    assert G(7.0) == 0.0


def test_ramp_norm_is_one_third():
    assert ramp_G(1).norm2() == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert ramp_G(5).norm2() == pytest.approx(5.0 / 3.0, rel=1e-14)


@pytest.mark.parametrize("l", [1, 2, 4, 16, 64])
def test_smooth_ramp_l2_distance_and_support(l):
    S = smooth_ramp_G(l)
    G = ramp_G(l)
    lo, hi = S.support
    assert -2 * l <= lo and hi <= 2 * l
    # independent quadrature of the L2 distance (split at the kink locations)
    w = mollifier_width(l)
    pts = [-w, 0.0, w, l - w, l, l + w]
    d2 = quad_l2(lambda u: S(u) - G(u), lambda u: S(u) - G(u), lo, hi, pts)
    assert math.sqrt(d2) <= 2.0 / l
    assert math.sqrt((S - G).norm2()) == pytest.approx(math.sqrt(d2), rel=1e-6)


def test_smooth_ramp_4_bound_example():
    assert math.sqrt((smooth_ramp_G(4) - ramp_G(4)).norm2()) <= 0.5


def test_smooth_ramp_is_continuous_and_bounded():
    S = smooth_ramp_G(8)
    u = np.linspace(-1, 10, 20001)
    v = S(u)
    assert v.min() >= -1e-12 and v.max() <= 1.0 + 1e-12
    assert np.max(np.abs(np.diff(v))) < 0.05


def test_inner_matches_quadrature():
    f = GridFunction.from_callable(np.sin, (-1.0, 2.0), h=0.1)
    g = ramp_G(1.5)
    expect = quad_l2(f, g, -1.0, 2.0, points=list(f.knots[1:-1]) + [1.5])
    assert f.inner(g) == pytest.approx(expect, rel=1e-10)


def test_integral_oriented():
    G = ramp_G(2)
    assert G.integral() == pytest.approx(1.0)
    assert G.integral(0.0, 1.0) == pytest.approx(0.75)
    assert G.integral(1.0, 0.0) == pytest.approx(-0.75)
    assert G.integral(-5.0, -1.0) == 0.0


def test_shift_and_sum():
    f = ramp_G(1)
    g = f.shifted(0.5)
    assert g(0.5) == 1.0 and g(0.25) == 0.0
    h = f + g
    assert h(0.75) == pytest.approx(f(0.75) + g(0.75))
    assert (f - f).norm2() == 0.0


def test_autocorrelation_of_ramp():
    # A(w) = l/3 - w/2 + w^3/(6 l^2) for 0 <= w <= l
    l = 2.0
    G = ramp_G(l)
    for w in (0.0, 0.3, 1.0, 1.9):
        expect = l / 3 - w / 2 + w**3 / (6 * l * l)
        assert G.autocorrelation(w) == pytest.approx(expect, abs=1e-14)
        assert G.autocorrelation(-w) == pytest.approx(expect, abs=1e-14)
    assert G.autocorrelation(2.5) == 0.0


def test_gradient_norm_ignores_jumps():
    assert ramp_G(1).gradient_norm2() == pytest.approx(1.0)
    assert ramp_G(4).gradient_norm2() == pytest.approx(0.25)


def test_integrate_weighted_respects_jumps():
    G = ramp_G(1)
    val = G.integrate_weighted(lambda u: np.ones_like(u), breakpoints=(0.0,))
    assert val == pytest.approx(0.5, abs=1e-14)
    val = G.integrate_weighted(np.exp, breakpoints=(0.0,))
    assert val == pytest.approx(math.e - 2.0, rel=1e-12)


def test_bumps_have_requested_mass():
    assert gaussian_bump(0.3, 0.1, mass=2.0).integral() == pytest.approx(2.0, rel=1e-6)
    b = compact_bump(-0.2, 0.15, mass=-1.5)
    assert b.integral() == pytest.approx(-1.5, rel=1e-12)
    assert b.support == pytest.approx((-0.35, -0.05))


def test_space_time_dirichlet_form_of_constant_ramp():
    G = SpaceTimeGridFunction.constant(ramp_G(1), 1.0)
    assert G.dirichlet_form() == pytest.approx(1.0)
    assert SpaceTimeGridFunction.constant(GridFunction.zero(), 2.0).dirichlet_form() == 0.0


def test_space_time_interpolates_linearly_in_time():
    a = ramp_G(1)
    G = SpaceTimeGridFunction(np.array([0.0, 1.0]), (a, a.scaled(3.0)))
    assert G.at(0.5)(0.0) == pytest.approx(2.0)
    # |grad|^2 = (1 + 2 s)^2 on (0, 1): integral over s in [0, 1] is 13/3
    assert G.dirichlet_form() == pytest.approx(13.0 / 3.0, rel=1e-12)


def test_grid_path_basics():
    p = GridPath.from_function(lambda t: t * t, 1.0, 4)
    assert p(0.5) == pytest.approx(0.25)
    np.testing.assert_allclose(p.slopes, [0.25, 0.75, 1.25, 1.75])
    with pytest.raises(ValueError):
        GridPath(np.array([0.0, 0.0]), np.array([1.0, 2.0]))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=12),
    st.lists(st.floats(-3, 3), min_size=3, max_size=12),
    st.floats(-2, 2),
)
def test_inner_is_bilinear_and_symmetric(vf, vg, c):
    f = GridFunction.from_samples(np.linspace(-1, 1, len(vf)), vf)
    g = GridFunction.from_samples(np.linspace(-0.5, 1.7, len(vg)), vg)
    assert f.inner(g) == pytest.approx(g.inner(f), abs=1e-12)
    assert f.scaled(c).inner(g) == pytest.approx(c * f.inner(g), abs=1e-10)
    assert (f + g).norm2() == pytest.approx(f.norm2() + 2 * f.inner(g) + g.norm2(), abs=1e-9)
    assert f.norm2() >= 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=10), st.floats(-3, 3))
def test_autocorrelation_bounded_by_norm(vals, w):
    f = GridFunction.from_samples(np.linspace(0, 1, len(vals)), vals)
    assert abs(f.autocorrelation(w)) <= f.norm2() + 1e-12
    assert f.autocorrelation(w) == pytest.approx(f.autocorrelation(-w), abs=1e-12)
