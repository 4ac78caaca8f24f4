"""Gaussian-limit objects for the stationary WASEP.

Covariances of the current and tagged particle, the Volterra kernel of the
Hurst-1/4 fractional Brownian motion, covariance matrices and samplers,
heat-semigroup pairings of test functions, the limiting field covariances
and the macroscopic current functionals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad
from scipy.linalg import cho_solve, solve_triangular

from .errors import DomainError, QuadratureError, SingularCovarianceError
from .gridfunc import GridFunction, GridPath, SpaceTimeGridFunction
from .special import hyp2f1, norm_cdf, norm_pdf

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Normalising constant of the Hurst-1/4 kernel and the resulting prefactor.
V_CONST = 8.0 * math.gamma(1.5) * math.cos(math.pi / 4.0) / math.pi
KERNEL_PREFACTOR = 1.0 / (math.sqrt(V_CONST) * math.gamma(0.75))

# The limiting density profile is transported with velocity
# DRIFT_SIGN * alpha * (1 - 2 rho).  Field covariances of a single test
# function are even in this sign (the autocorrelation is even), so only the
# macroscopic current depends on it; +1 matches the simulated mean current.
DRIFT_SIGN = +1.0

QUAD_EPS = 1e-11


class Regime(str, Enum):
    SUB = "sub"
    CRITICAL = "critical"
    SUPER = "super"

    @classmethod
    def of(cls, beta: float) -> "Regime":
        if beta < 1.0:
            return cls.SUB
        if beta == 1.0:
            return cls.CRITICAL
        return cls.SUPER


@dataclass(frozen=True)
class VarianceSpec:
    alpha: float
    rho: float
    regime: Regime

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError("rho must lie in [0, 1]")
        if self.alpha < 0:
            raise DomainError("alpha must be non-negative")
        object.__setattr__(self, "regime", Regime(self.regime))

    @classmethod
    def from_beta(cls, alpha: float, beta: float, rho: float) -> "VarianceSpec":
        return cls(alpha, rho, Regime.of(beta))

    @property
    def chi(self) -> float:
        return self.rho * (1.0 - self.rho)

    @property
    def drift(self) -> float:
        """``m = alpha |1 - 2 rho|``."""
        return self.alpha * abs(1.0 - 2.0 * self.rho)

    @property
    def velocity(self) -> float:
        """Signed transport speed of the limiting density profile."""
        return DRIFT_SIGN * self.alpha * (1.0 - 2.0 * self.rho)

    @property
    def degenerate(self) -> bool:
        """True when the current covariance vanishes identically."""
        return self.chi == 0.0 or (self.regime is Regime.SUB and self.drift == 0.0)


# -- scalar covariance functions --------------------------------------------

def f_drift(t, m: float):
    """``m t / 2 + E[(B_t - m t)_+]`` in closed form."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    rt = np.sqrt(t)
    k = m * rt
    out = 0.5 * m * t + rt * (norm_pdf(k) - k * (1.0 - norm_cdf(k)))
    return out if out.ndim else float(out)


def variance_a(t, s, spec: VarianceSpec):
    """Limiting covariance ``a(t, s)`` of the centred current over ``sqrt(n)``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("times must be non-negative")
    chi = spec.chi
    if spec.regime is Regime.SUB:
        out = chi * spec.drift * np.minimum(t, s)
    elif spec.regime is Regime.CRITICAL:
        m = spec.drift
        out = chi * (f_drift(t, m) + f_drift(s, m) - f_drift(np.abs(t - s), m))
    else:
        out = chi * (np.sqrt(t) + np.sqrt(s) - np.sqrt(np.abs(t - s))) / SQRT_2PI
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def fbm_cov(t, s):
    """Standard fractional Brownian motion covariance at Hurst index 1/4."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    out = 0.5 * (np.sqrt(t) + np.sqrt(s) - np.sqrt(np.abs(t - s)))
    return out if out.ndim else float(out)


# -- Volterra kernel ---------------------------------------------------------

def _kernel_gap(gap, u):
    """Kernel written through ``gap = t - u`` and ``u`` to keep tiny gaps exact."""
    gap = np.asarray(gap, dtype=float)
    u = np.asarray(u, dtype=float)
    return KERNEL_PREFACTOR * gap**-0.25 * hyp2f1(0.25, -0.25, 0.75, -gap / u)


def kernel_K(t, s):
    """Volterra kernel ``K(t, s)``, ``0 < s < t``, of the Hurst-1/4 fBm."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(s >= t):
        raise DomainError("kernel_K needs 0 < s < t")
    out = _kernel_gap(*np.broadcast_arrays(t - s, s))
    out = np.asarray(out)
    return out if out.ndim else float(out)


def kernel_cov_integral(t: float, s: float, tol: float = 1e-10) -> float:
    """``integral_0^s K(t, u) K(s, u) du`` for ``0 < s <= t``.

    Both ends of ``[0, s]`` carry quarter-power singularities; on each half
    the substitution ``u = v**4`` (resp. ``u = s - v**4``) turns them into
    polynomial behaviour before adaptive Gauss-Kronrod quadrature.
    """
    if not 0 < s <= t:
        raise DomainError("kernel_cov_integral needs 0 < s <= t")
    gap_ts = t - s
    half = 0.5 * s
    top = half**0.25

    def lower(v):
        u = v**4
        return float(_kernel_gap(t - u, u) * _kernel_gap(s - u, u)) * 4.0 * v**3

    def upper(v):
        w = v**4  # s - u
        u = s - w
        if w == 0.0:
            return 0.0
        return float(_kernel_gap(gap_ts + w, u) * _kernel_gap(w, u)) * 4.0 * v**3

    total = 0.0
    for fn in (lower, upper):
        val, err = quad(fn, 0.0, top, epsabs=tol, epsrel=tol, limit=400)
        if not np.isfinite(val) or err > 100 * max(tol, tol * abs(val)):
            raise QuadratureError(f"kernel integral did not converge (err={err:.2e})")
        total += val
    return total


# -- covariance matrices -----------------------------------------------------

JITTER_REL = 1e-12


class CovarianceMatrix:
    """Symmetric covariance over a time grid with a cached Cholesky factor.

    ``factor`` is the lower triangular factor of ``entries + jitter * I``
    or ``None`` when even the jittered matrix is not positive definite, in
    which case ``singular`` is True.
    """

    def __init__(self, times, entries):
        self.times = np.asarray(times, dtype=float)
        e = np.asarray(entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] != self.times.size:
            raise ValueError("entries must be square and match times")
        self.entries = 0.5 * (e + e.T)
        self.entries.setflags(write=False)
        self.jitter = 0.0
        self.factor = self._factorize()
        if self.factor is not None:
            self.factor.setflags(write=False)

    def _factorize(self):
        a = self.entries
        scale = float(np.max(np.abs(np.diag(a)))) if a.size else 0.0
        if scale == 0.0:
            return None
        for jitter in (0.0, JITTER_REL * scale):
            try:
                fac = np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(fac)):
                self.jitter = jitter
                return fac
        return None

    @property
    def size(self) -> int:
        return self.times.size

    @property
    def singular(self) -> bool:
        return self.factor is None

    def solve(self, r) -> np.ndarray:
        """``A^{-1} r`` through the triangular factor."""
        if self.singular:
            raise SingularCovarianceError("covariance matrix is singular")
        return cho_solve((self.factor, True), np.asarray(r, dtype=float))

    def whiten(self, r) -> np.ndarray:
        """``L^{-1} r``, whose squared norm is ``r^T A^{-1} r``."""
        if self.singular:
            raise SingularCovarianceError("covariance matrix is singular")
        return solve_triangular(self.factor, np.asarray(r, dtype=float), lower=True)

    def __repr__(self):
        state = "singular" if self.singular else f"jitter={self.jitter:.1e}"
        return f"CovarianceMatrix(m={self.size}, {state})"


def covariance_matrix(times, spec: VarianceSpec) -> CovarianceMatrix:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("times must be positive and strictly increasing")
    a = variance_a(times[:, None], times[None, :], spec)
    return CovarianceMatrix(times, a)


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_gaussian_paths(cov: CovarianceMatrix, seed, n_samples: int) -> np.ndarray:
    """``n_samples`` mean-zero Gaussian vectors with covariance ``cov``."""
    m = cov.size
    if not np.any(cov.entries):
        return np.zeros((n_samples, m))
    if cov.singular:
        raise SingularCovarianceError("cannot sample from a singular covariance")
    z = _as_generator(seed).standard_normal((n_samples, m))
    return z @ cov.factor.T


def sample_gaussian_path(cov: CovarianceMatrix, seed) -> GridPath:
    values = sample_gaussian_paths(cov, seed, 1)[0]
    return GridPath(cov.times, values)


# -- heat semigroup pairings ----------------------------------------------

def _gauss_weighted(
    g: GridFunction, t: float, func, shift: float = 0.0, vanishes_off_support: bool = True
) -> float:
    """``integral over w of g_t(w - shift) func(w)`` for the N(0, t) density g_t.

    With ``vanishes_off_support`` the range is also cut to the lags where an
    autocorrelation of ``g`` can be non-zero.
    """
    rt = math.sqrt(t)
    lo, hi = g.support
    reach = hi - lo

    def integrand(w):
        return float(norm_pdf((w - shift) / rt)) / rt * func(w)

    a, b = shift - 12.0 * rt, shift + 12.0 * rt
    if vanishes_off_support:
        a, b = max(a, -reach), min(b, reach)
    if a >= b:
        return 0.0
    pts = [p for p in (0.0, shift) if a < p < b]
    val, err = quad(integrand, a, b, points=pts or None, epsabs=1e-12, epsrel=1e-12, limit=800)
    if err > 1e-8:
        raise QuadratureError(f"heat pairing did not converge (err={err:.2e})")
    return val


def heat_semigroup_inner(g: GridFunction, t: float, drift: float = 0.0) -> float:
    """``<T_t g, g>`` for the heat semigroup of ``(1/2) Laplacian``.

    With ``drift`` the Gaussian kernel is recentred at ``drift * t``.  The
    double integral is reduced exactly to a single integral of the
    autocorrelation of ``g`` against the Gaussian density.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        return g.norm2()
    return _gauss_weighted(g, t, g.autocorrelation, shift=drift * t)


def _heat_loss(g: GridFunction, t: float, drift: float = 0.0) -> float:
    """``<g, g> - <T_t g, g>`` evaluated without cancellation."""
    if t == 0:
        return 0.0
    a0 = g.norm2()
    return _gauss_weighted(
        g, t, lambda w: a0 - g.autocorrelation(w), shift=drift * t, vanishes_off_support=False
    )


def field_cov_increment(g: GridFunction, t: float, s: float, spec: VarianceSpec) -> float:
    """``Cov(Y_t(g) - Y_0(g), Y_s(g) - Y_0(g))`` for the stationary limit field."""
    if t < 0 or s < 0:
        raise DomainError("times must be non-negative")
    r = abs(t - s)
    if spec.regime is Regime.SUB:
        a0 = g.norm2()
        c = spec.velocity

        def loss(x):
            return 0.0 if x == 0 else a0 - g.autocorrelation(c * x)
    else:
        c = spec.velocity if spec.regime is Regime.CRITICAL else 0.0

        def loss(x):
            return _heat_loss(g, x, c)
    return spec.chi * (loss(t) + loss(s) - loss(r))


def field_cov_matrix(g: GridFunction, times, spec: VarianceSpec) -> CovarianceMatrix:
    times = np.asarray(times, dtype=float)
    m = times.size
    e = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            e[i, j] = e[j, i] = field_cov_increment(g, times[i], times[j], spec)
    return CovarianceMatrix(times, e)


# -- macroscopic current ------------------------------------------------------

def V_weight(t: float, u):
    """``P(B_t + u >= 0) - 1{u >= 0}``."""
    u = np.asarray(u, dtype=float)
    return norm_cdf(u / math.sqrt(t)) - (u >= 0)


def R_weight(t: float, u, velocity: float):
    """``P(B_t >= -u - v t) - 1{u >= 0}`` with transport velocity ``v``."""
    u = np.asarray(u, dtype=float)
    return norm_cdf((u + velocity * t) / math.sqrt(t)) - (u >= 0)


def _forcing_current(G: SpaceTimeGridFunction, t: float, velocity: float) -> float:
    """``integral_0^t integral dG(s,u)/du g_{t-s}(u + v (t-s)) du ds``."""

    def inner(s):
        r = t - s
        slice_ = G.at(s)
        slopes = slice_.slopes
        a, b = slice_.knots[:-1], slice_.knots[1:]
        if r <= 0:
            # g_0 is a point mass at the origin
            return float(np.sum(slopes[(a <= 0) & (0 < b)]))
        rt = math.sqrt(r)
        mass = norm_cdf((b + velocity * r) / rt) - norm_cdf((a + velocity * r) / rt)
        return float(np.sum(slopes * mass))

    pts = [x for x in G.times if 0 < x < t]
    val, err = quad(inner, 0.0, t, points=pts or None, epsabs=1e-10, epsrel=1e-10, limit=400)
    if err > 1e-6:
        raise QuadratureError(f"forcing term did not converge (err={err:.2e})")
    return val


def macroscopic_current(
    phi: GridFunction,
    G: SpaceTimeGridFunction | None,
    t: float,
    spec: VarianceSpec,
    dynamic_rate: float | None = None,
) -> float:
    """Net macroscopic mass ``integral_0^inf [mu(t,u) - phi(u)] du`` moved past 0.

    ``mu`` is the finite-rate path started from the profile ``phi`` and
    forced by ``G`` (ignored in the sub-critical regime, where the profile
    is only transported).  ``G=None`` means no forcing; passing a positive
    ``dynamic_rate`` without ``G`` is a contradiction and raises.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        return 0.0
    if spec.regime is Regime.SUB:
        return phi.integral(-spec.velocity * t, 0.0)
    if G is None and dynamic_rate:
        raise DomainError("a positive dynamic rate needs its forcing G")
    v = spec.velocity if spec.regime is Regime.CRITICAL else 0.0
    width = min(0.05, 0.25 * math.sqrt(t))
    first = phi.integrate_weighted(
        lambda u: R_weight(t, u, v), breakpoints=(0.0,), max_width=width
    )
    if G is None:
        return first
    return first + _forcing_current(G, t, v)
