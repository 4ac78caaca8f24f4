import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasep.errors import DomainError, SingularCovarianceError
from wasep.gridfunc import GridFunction, SpaceTimeGridFunction, compact_bump, gaussian_bump, ramp_G, smooth_ramp_G
from wasep.theory import (
    DRIFT_SIGN,
    KERNEL_PREFACTOR,
    V_CONST,
    R_weight,
    Regime,
    V_weight,
    VarianceSpec,
    covariance_matrix,
    f_drift,
    fbm_cov,
    field_cov_increment,
    heat_semigroup_inner,
    kernel_K,
    kernel_cov_integral,
    macroscopic_current,
    sample_gaussian_path,
    sample_gaussian_paths,
    variance_a,
)

SUP = VarianceSpec(1.0, 0.3, Regime.SUPER)
SUB = VarianceSpec(1.0, 0.3, Regime.SUB)
CRIT = VarianceSpec(1.0, 0.3, Regime.CRITICAL)


# -- variance spec and a(t, s) ----------------------------------------------------

def test_spec_derived_quantities():
    assert SUP.chi == 0.3 * 0.7
    assert SUB.drift == pytest.approx(0.4)
    assert VarianceSpec(1.0, 0.7, "sub").drift == pytest.approx(0.4)
    assert VarianceSpec(1.0, 0.5, "sub").degenerate
    assert not SUB.degenerate
    assert VarianceSpec.from_beta(1, 0.5, 0.3).regime is Regime.SUB
    assert VarianceSpec.from_beta(1, 1.0, 0.3).regime is Regime.CRITICAL
    assert VarianceSpec.from_beta(1, 2.0, 0.3).regime is Regime.SUPER
    with pytest.raises(DomainError):
        VarianceSpec(1.0, 1.2, "sub")


@pytest.mark.parametrize("spec", [SUP, SUB, CRIT])
def test_a_vanishes_at_time_zero(spec):
    assert variance_a(0.0, 0.7, spec) == 0.0
    assert variance_a(0.7, 0.0, spec) == 0.0


def test_a_sub_half_density_is_zero():
    spec = VarianceSpec(1.0, 0.5, "sub")
    assert variance_a(1.0, 2.0, spec) == 0.0
    assert variance_a(3.0, 3.0, spec) == 0.0


def test_a_super_example():
    assert variance_a(1.0, 1.0, SUP) == pytest.approx(2 * 0.21 / math.sqrt(2 * math.pi), rel=1e-15)
    assert variance_a(1.0, 1.0, SUP) == pytest.approx(0.16755576, abs=1e-8)


def test_a_sub_is_scaled_brownian():
    assert variance_a(0.5, 1.0, SUB) == pytest.approx(0.21 * 0.4 * 0.5)


def test_critical_without_drift_equals_super():
    crit0 = VarianceSpec(0.0, 0.3, "critical")
    for t in (0.2, 0.7, 1.3):
        for s in (0.1, 0.7, 2.0):
            assert variance_a(t, s, crit0) == pytest.approx(variance_a(t, s, SUP), abs=1e-10)


def test_super_equals_scaled_fbm():
    for t in (0.3, 0.7, 1.4):
        for s in (0.3, 0.7, 1.4):
            expect = 0.21 * math.sqrt(2 / math.pi) * fbm_cov(t, s)
            assert variance_a(t, s, SUP) == pytest.approx(expect, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(t=st.floats(0, 5), s=st.floats(0, 5), rho=st.floats(0, 1), alpha=st.floats(0, 3),
       regime=st.sampled_from(list(Regime)))
def test_a_symmetric_and_nonnegative_diagonal(t, s, rho, alpha, regime):
    spec = VarianceSpec(alpha, rho, regime)
    assert variance_a(t, s, spec) == pytest.approx(variance_a(s, t, spec), abs=1e-14)
    assert variance_a(t, t, spec) >= -1e-15


def test_a_rejects_negative_time():
    with pytest.raises(DomainError):
        variance_a(-1.0, 1.0, SUP)


# -- f ----------------------------------------------------------------------------

def test_f_examples():
    assert f_drift(0.0, 0.7) == 0.0
    assert f_drift(1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)
    assert f_drift(1.0, 1.0) == pytest.approx(0.5833155, abs=5e-8)


@pytest.mark.parametrize("m", [0.0, 0.4, 1.0])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_f_closed_form_against_monte_carlo(m, t):
    rng = np.random.default_rng(int(100 * m + 10 * t))
    b = rng.standard_normal(10**6) * math.sqrt(t)
    x = m * t / 2 + np.maximum(b - m * t, 0.0)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - f_drift(t, m)) <= 4 * se


def test_f_nondecreasing():
    t = np.linspace(0, 5, 400)
    for m in (0.0, 0.4, 1.0, 3.0):
        assert np.all(np.diff(f_drift(t, m)) >= -1e-15)


# -- kernel ----------------------------------------------------------------------

def test_constants():
    assert V_CONST == pytest.approx(1.5957691216057307, rel=1e-15)
    assert 1 / KERNEL_PREFACTOR == pytest.approx(1.5479923996813371, rel=1e-15)


def test_kernel_against_50_digit_reference():
    mpmath.mp.dps = 50
    V = 8 * mpmath.gamma(1.5) * mpmath.cos(mpmath.pi / 4) / mpmath.pi
    for t, s in ((1.0, 0.5), (2.0, 0.1), (1.0, 0.999), (5.0, 0.01)):
        ref = (mpmath.mpf(t) - s) ** -0.25 / (mpmath.sqrt(V) * mpmath.gamma(0.75)) * mpmath.hyp2f1(
            0.25, -0.25, 0.75, 1 - mpmath.mpf(t) / s)
        assert kernel_K(t, s) == pytest.approx(float(ref), rel=1e-12)
    assert kernel_K(1.0, 0.5) > 0


def test_kernel_near_diagonal_limit():
    for gap in (1e-4, 1e-8, 1e-12):
        assert kernel_K(1.0, 1.0 - gap) * gap**0.25 == pytest.approx(KERNEL_PREFACTOR, rel=1e-3)


def test_kernel_domain():
    with pytest.raises(DomainError):
        kernel_K(1.0, 1.0)
    with pytest.raises(DomainError):
        kernel_K(1.0, 0.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_kernel_variance_is_sqrt_t(t):
    assert abs(kernel_cov_integral(t, t) - math.sqrt(t)) <= 1e-6


def test_kernel_covariance_grid():
    grid = (0.4, 0.8, 1.2, 1.6, 2.0)
    err = max(abs(kernel_cov_integral(max(t, s), min(t, s)) - fbm_cov(t, s)) for t in grid for s in grid)
    assert err <= 1e-6


def test_kernel_covariance_small_s():
    assert kernel_cov_integral(1.0, 1e-10) < 1e-4


def test_fbm_cov_examples():
    assert fbm_cov(1.0, 0.0) == 0.0
    assert fbm_cov(1.0, 1.0) == 1.0


# -- covariance matrices and sampling ---------------------------------------------

def test_covariance_matrix_examples():
    A = covariance_matrix([1.0], SUP)
    assert A.entries[0, 0] == pytest.approx(0.16755576, abs=1e-8)
    B = covariance_matrix([0.2, 0.5, 1.0, 3.0], SUB)
    assert not B.singular and B.jitter == 0.0
    np.testing.assert_allclose(B.entries, 0.084 * np.minimum.outer(B.times, B.times))
    Z = covariance_matrix([0.5, 1.0], VarianceSpec(1.0, 0.5, "sub"))
    assert Z.singular
    with pytest.raises(SingularCovarianceError):
        Z.solve([1.0, 1.0])
    with pytest.raises(DomainError):
        covariance_matrix([1.0, 0.5], SUP)


def test_factor_is_read_only_and_solves():
    A = covariance_matrix([0.25, 0.5, 1.0], SUP)
    with pytest.raises(ValueError):
        A.entries[0, 0] = 1.0
    r = np.array([0.1, -0.2, 0.3])
    np.testing.assert_allclose(A.entries @ A.solve(r), r, atol=1e-12)
    z = A.whiten(r)
    assert z @ z == pytest.approx(r @ np.linalg.solve(A.entries, r), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 4.0), min_size=1, max_size=12, unique=True),
       st.sampled_from([SUP, SUB, CRIT]))
def test_covariance_matrices_factorize(times, spec):
    times = np.sort(np.array(times))
    if np.any(np.diff(times) < 1e-3):
        return
    A = covariance_matrix(times, spec)
    assert not A.singular
    assert A.jitter <= 1e-12 * np.max(np.diag(A.entries))


def test_sampler_zero_and_determinism():
    Z = covariance_matrix([0.5, 1.0], VarianceSpec(1.0, 0.5, "sub"))
    p = sample_gaussian_path(Z, 3)
    assert np.all(p.values == 0.0)
    A = covariance_matrix([0.5, 1.0], SUP)
    np.testing.assert_array_equal(sample_gaussian_paths(A, 11, 5), sample_gaussian_paths(A, 11, 5))


def test_sampler_covariance():
    A = covariance_matrix([0.5, 1.0], SUP)
    x = sample_gaussian_paths(A, 2024, 10**5)
    for i in range(2):
        for j in range(2):
            prod = (x[:, i] - x[:, i].mean()) * (x[:, j] - x[:, j].mean())
            se = prod.std(ddof=1) / math.sqrt(len(prod))
            assert abs(prod.mean() - A.entries[i, j]) <= 4 * se


def test_sampler_brownian_independent_increments():
    A = covariance_matrix([0.5, 1.0], SUB)
    x = sample_gaussian_paths(A, 99, 10**5)
    inc = x[:, 1] - x[:, 0]
    r = np.corrcoef(inc, x[:, 0])[0, 1]
    assert abs(r) <= 4 / math.sqrt(len(inc))


# -- heat pairings and field covariances --------------------------------------------

def test_heat_inner_ramp():
    G = ramp_G(1)
    assert heat_semigroup_inner(G, 0.0) == pytest.approx(1 / 3, abs=1e-15)
    assert heat_semigroup_inner(G, 1e4) < 1e-2
    assert heat_semigroup_inner(G, 1e8) < 1e-4


@pytest.mark.parametrize("t", [0.01, 0.3, 2.0])
def test_heat_inner_against_tensor_quadrature(t):
    # ramp G_2 is a single linear piece, so a tensor Gauss rule on [0, 2]^2 is an
    # independent and very accurate reference for the double integral
    l = 2.0
    x, w = np.polynomial.legendre.leggauss(400)
    u = l * (x + 1) / 2
    w = w * l / 2
    G = 1 - u / l
    kern = np.exp(-((u[:, None] - u[None, :]) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t)
    ref = float((w * G) @ kern @ (w * G))
    assert heat_semigroup_inner(ramp_G(l), t) == pytest.approx(ref, abs=1e-8)


def test_heat_inner_monotone_in_time():
    G = smooth_ramp_G(2)
    vals = [heat_semigroup_inner(G, t) for t in (0.0, 0.1, 0.5, 1.0, 4.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_field_cov_zero_cases():
    G = smooth_ramp_G(4)
    for spec in (SUP, SUB, CRIT):
        assert field_cov_increment(G, 0.0, 0.0, spec) == 0.0
    half = VarianceSpec(1.0, 0.5, "sub")
    assert field_cov_increment(G, 1.0, 0.5, half) == 0.0


def test_field_cov_converges_to_a_super():
    errs = []
    for l in (4, 8, 16, 32, 64):
        v = field_cov_increment(smooth_ramp_G(l), 1.0, 0.5, SUP)
        errs.append(abs(v / variance_a(1.0, 0.5, SUP) - 1))
    assert errs[-1] <= 0.02
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_field_cov_sub_limit():
    v = field_cov_increment(smooth_ramp_G(64), 1.0, 1.0, SUB)
    assert abs(v / variance_a(1.0, 1.0, SUB) - 1) <= 0.02


def test_field_cov_even_in_drift_sign():
    G = compact_bump(0.0, 0.8)
    for regime in ("critical", "sub"):
        a = field_cov_increment(G, 1.0, 0.5, VarianceSpec(1.0, 0.3, regime))
        b = field_cov_increment(G, 1.0, 0.5, VarianceSpec(1.0, 0.7, regime))
        assert a == pytest.approx(b, rel=1e-12)


def test_drift_sign_is_a_recorded_constant():
    assert DRIFT_SIGN == 1.0
    assert SUB.velocity == pytest.approx(0.4)
    assert VarianceSpec(1.0, 0.7, "sub").velocity == pytest.approx(-0.4)


# -- macroscopic current ------------------------------------------------------------

def test_weights_bounded_and_odd():
    u = np.linspace(-6, 6, 1201)
    for t in (0.1, 1.0, 3.0):
        v = V_weight(t, u)
        r = R_weight(t, u, 0.4)
        assert np.all(np.abs(v) <= 1) and np.all(np.abs(r) <= 1)
        mask = u != 0
        np.testing.assert_allclose(v[mask], -V_weight(t, -u[mask]), atol=1e-15)
    assert abs(V_weight(1.0, 40.0)) < 1e-12 and abs(V_weight(1.0, -40.0)) < 1e-12


def test_current_trivial():
    zero = GridFunction.zero()
    for spec in (SUP, SUB, CRIT):
        assert macroscopic_current(zero, None, 1.0, spec) == 0.0
        assert macroscopic_current(zero, SpaceTimeGridFunction.constant(zero, 1.0), 1.0, spec) == 0.0


def test_current_sub_window_mass():
    t = 1.0
    c = SUB.velocity * t
    phi = compact_bump(-c / 2, 0.45 * c)
    assert macroscopic_current(phi, None, t, SUB) == pytest.approx(1.0, abs=1e-6)
    assert macroscopic_current(phi.shifted(c), None, t, SUB) == 0.0


def test_current_super_even_profile():
    for phi in (gaussian_bump(0.0, 0.3), compact_bump(0.0, 0.7, 2.0)):
        assert abs(macroscopic_current(phi, None, 1.0, SUP)) <= 1e-6


def test_current_super_matches_transport():
    # with G = 0 the profile evolves by the heat semigroup; compare with a
    # direct evaluation of the mass moved across the origin
    phi = compact_bump(-0.3, 0.2)
    t = 0.5
    from scipy.integrate import quad

    k = phi.knots
    direct = sum(
        quad(lambda u: float(phi(u)) * 0.5 * math.erfc(-u / math.sqrt(2 * t)), a, b, epsabs=1e-15)[0]
        for a, b in zip(k[:-1], k[1:])
    )
    assert macroscopic_current(phi, None, t, SUP) == pytest.approx(direct, abs=1e-8)


def test_current_forcing_term():
    # G(s, u) = G_1(u) for all s: int_0^t int dG/du g_{t-s}(u) du ds = int_0^t [g_r(0)... ]
    G = SpaceTimeGridFunction.constant(ramp_G(1), 1.0)
    zero = GridFunction.zero()
    t = 0.5
    from scipy.integrate import quad

    def expect_inner(r):
        # slope -1 on (0, 1): -P(0 < B_r < 1)
        return -(0.5 * math.erf(1 / math.sqrt(2 * r))) if r > 0 else -1.0

    ref, _ = quad(lambda s: expect_inner(t - s), 0, t, epsabs=1e-12)
    assert macroscopic_current(zero, G, t, SUP) == pytest.approx(ref, abs=1e-8)


def test_current_needs_forcing_for_dynamic_rate():
    with pytest.raises(DomainError):
        macroscopic_current(GridFunction.zero(), None, 1.0, SUP, dynamic_rate=1.0)
