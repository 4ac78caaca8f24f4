"""Moderate-deviation rate functions for the current, the tagged particle and
the density field, plus the finite-dimensional quadratic forms behind them."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateRegimeError, DomainError, SingularCovarianceError
from .gridfunc import GridFunction, GridPath, SpaceTimeGridFunction
from .theory import (
    CovarianceMatrix,
    Regime,
    VarianceSpec,
    covariance_matrix,
    field_cov_matrix,
    kernel_K,
    macroscopic_current,
)

SUPER_RATE_FACTOR = math.sqrt(math.pi) / (2.0 * math.sqrt(2.0))
TIKHONOV_LAMBDA = 1e-8
COND_LIMIT = 1e12
PINV_RTOL = 1e-10
TRANSPORT_TOL = 1e-9


def _require_chi(rho: float) -> float:
    chi = rho * (1.0 - rho)
    if chi == 0.0:
        raise DegenerateRegimeError("rho in {0, 1}: the process is frozen and no rate is defined")
    return chi


def _require_nondegenerate(spec: VarianceSpec) -> None:
    _require_chi(spec.rho)
    if spec.regime is Regime.SUB and spec.drift == 0.0:
        raise DegenerateRegimeError(
            "degenerate sub-critical variance: beta < 1 with rho = 1/2 (or alpha = 0)"
        )


def rate_finite_dim(r, A: CovarianceMatrix) -> float:
    """``r^T A^{-1} r / 2`` through the triangular factor."""
    r = np.asarray(r, dtype=float)
    if r.shape != (A.size,):
        raise DomainError("r and A have different dimensions")
    if A.singular:
        raise SingularCovarianceError(
            "covariance is singular: degenerate regime (e.g. beta < 1 with rho = 1/2)"
        )
    z = A.whiten(r)
    return 0.5 * float(z @ z)


def rate_path_sub(h: GridPath, spec: VarianceSpec) -> float:
    """``|h'|^2_{L2} / (2 chi alpha |1 - 2 rho|)`` for the piecewise-linear ``h``."""
    if spec.regime is not Regime.SUB:
        raise DomainError("rate_path_sub applies to beta < 1")
    _require_nondegenerate(spec)
    energy = float(np.sum(h.slopes**2 * np.diff(h.times)))
    return energy / (2.0 * spec.chi * spec.drift)


# -- super-critical regime: Volterra map --------------------------------------

def _uniform_step(times: np.ndarray) -> float:
    d = np.diff(times)
    if d.size == 0 or np.any(np.abs(d - d[0]) > 1e-9 * d[0]):
        raise DomainError("a uniform time grid is required")
    return float(d[0])


def volterra_matrix(m: int, horizon: float) -> np.ndarray:
    """Midpoint rule ``W[k, j] = K(t_{k+1}, s_j) dt`` for ``j <= k``, with
    ``t_k = k dt`` and cell midpoints ``s_j = (j + 1/2) dt``."""
    dt = horizon / m
    t = dt * np.arange(1, m + 1)
    s = dt * (np.arange(m) + 0.5)
    W = np.zeros((m, m))
    kk, jj = np.tril_indices(m)
    W[kk, jj] = kernel_K(t[kk], s[jj]) * dt
    return W


def _cell_values(hdot: GridPath) -> tuple[np.ndarray, float, float]:
    """Midpoint values of ``h'``, the step and the horizon.

    A path tagged ``meta['kind'] == 'cell'`` already holds midpoint values
    (its times are the midpoints); otherwise ``hdot`` lives on the node grid
    ``0 = t_0 < ... < t_m = T`` and is interpolated at the midpoints.
    """
    if hdot.meta.get("kind") == "cell":
        dt = _uniform_step(hdot.times) if hdot.times.size > 1 else 2.0 * hdot.times[0]
        if abs(hdot.times[0] - 0.5 * dt) > 1e-9 * dt:
            raise DomainError("cell values must sit at the cell midpoints")
        return np.asarray(hdot.values, dtype=float), dt, dt * hdot.times.size
    if hdot.times[0] != 0.0:
        raise DomainError("node grid must start at 0")
    dt = _uniform_step(hdot.times)
    mids = 0.5 * (hdot.values[1:] + hdot.values[:-1])
    return mids, dt, float(hdot.times[-1])


def rate_path_super(hdot: GridPath, spec: VarianceSpec) -> tuple[float, GridPath]:
    """Rate ``sqrt(pi)/(2 sqrt(2) chi) |h'|^2`` and the path ``h = int K h'``."""
    chi = _require_chi(spec.rho)
    g, dt, horizon = _cell_values(hdot)
    m = g.size
    rate = SUPER_RATE_FACTOR / chi * float(np.sum(g * g) * dt)
    h = np.concatenate(([0.0], volterra_matrix(m, horizon) @ g))
    return rate, GridPath(dt * np.arange(m + 1), h)


def kernel_invert(h: GridPath) -> GridPath:
    """Solve the midpoint Volterra system for the cell values of ``h'``.

    Falls back to Tikhonov regularisation (parameter 1e-8) when the
    triangular system's condition number exceeds 1e12.  The result is a
    ``GridPath`` over the cell midpoints with ``meta`` recording the
    condition number and whether regularisation was used.
    """
    if h.times[0] != 0.0 or h.values[0] != 0.0:
        raise DomainError("path must start at h(0) = 0")
    dt = _uniform_step(h.times)
    m = h.times.size - 1
    W = volterra_matrix(m, float(h.times[-1]))
    rhs = np.asarray(h.values[1:], dtype=float)
    cond = float(np.linalg.cond(W))
    if cond > COND_LIMIT:
        g = np.linalg.solve(W.T @ W + TIKHONOV_LAMBDA * np.eye(m), W.T @ rhs)
        regularised = True
    else:
        g = solve_triangular(W, rhs, lower=True)
        regularised = False
    mids = dt * (np.arange(m) + 0.5)
    return GridPath(mids, g, {"kind": "cell", "cond": cond, "regularised": regularised})


def rate_tagged(rate_current: float, rho: float) -> float:
    """Tagged-particle rate ``rho**2`` times the current rate."""
    if rate_current < 0:
        raise DomainError("rates are non-negative")
    return rho * rho * rate_current


# -- grid quadratic forms --------------------------------------------------------

def grid_rate_sequence(h: GridPath, grids: Sequence[Sequence[float]], spec: VarianceSpec) -> np.ndarray:
    """``h^T A^{-1} h / 2`` on each time grid, ``A`` from the current covariance."""
    out = []
    for grid in grids:
        times = np.asarray(grid, dtype=float)
        A = covariance_matrix(times, spec)
        out.append(rate_finite_dim(h(times), A))
    return np.asarray(out)


def rate_beta1_grid(h: GridPath, grids, spec: VarianceSpec) -> tuple[np.ndarray, float, float]:
    """Critical-regime grid quadratic forms with their infimum and supremum.

    Both extremes are returned: under refinement the forms increase, so the
    supremum is the projective limit while the infimum is the coarsest grid.
    """
    if spec.regime is not Regime.CRITICAL:
        raise DomainError("rate_beta1_grid applies to beta = 1")
    _require_chi(spec.rho)
    vals = grid_rate_sequence(h, grids, spec)
    return vals, float(vals.min()), float(vals.max())


def dyadic_grids(horizon: float, sizes: Sequence[int]) -> list[np.ndarray]:
    return [horizon * np.arange(1, m + 1) / m for m in sizes]


# -- field-level functionals ---------------------------------------------------

def q_initial(phi: GridFunction, rho: float) -> float:
    """``|phi|^2_{L2} / (2 chi)``."""
    return phi.norm2() / (2.0 * _require_chi(rho))


def q_dynamic(G: SpaceTimeGridFunction, spec: VarianceSpec) -> float:
    """``[G, G] / (2 chi)``; identically zero in the sub-critical regime."""
    chi = _require_chi(spec.rho)
    if spec.regime is Regime.SUB:
        return 0.0
    return G.dirichlet_form() / (2.0 * chi)


def sigma_matrix(G: GridFunction, times, spec: VarianceSpec) -> CovarianceMatrix:
    """Covariance of the field increments ``Y_t(G) - Y_0(G)`` over ``times``."""
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("times must be positive and strictly increasing")
    return field_cov_matrix(G, times, spec)


def legendre_rate(r, Sigma: CovarianceMatrix) -> float:
    """Legendre transform ``sup_xi {xi.r - xi^T Sigma xi / 2}``.

    Equals ``r^T Sigma^{-1} r / 2`` for invertible ``Sigma``.  For singular
    ``Sigma`` it is ``+inf`` unless ``r`` lies in the range, where the
    pseudo-inverse form is returned.  A matrix that only factorises after
    jitter counts as singular here.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (Sigma.size,):
        raise DomainError("r and Sigma have different dimensions")
    if not Sigma.singular and Sigma.jitter == 0.0:
        z = Sigma.whiten(r)
        return 0.5 * float(z @ z)
    lam, vec = np.linalg.eigh(Sigma.entries)
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    keep = lam > PINV_RTOL * top if top > 0 else np.zeros(lam.shape, dtype=bool)
    coef = vec.T @ r
    scale = max(1.0, float(np.linalg.norm(r)))
    if np.any(np.abs(coef[~keep]) > 1e-12 * scale):
        return math.inf
    return 0.5 * float(np.sum(coef[keep] ** 2 / lam[keep]))


def transport_terms(phi: GridFunction, times, spec: VarianceSpec) -> tuple[float, float]:
    """``(Q, r^T A^{-1} r / 2)`` for a transported initial profile ``phi``.

    ``r_i`` is the macroscopic current at ``t_i`` and ``Q`` the initial cost
    (the dynamic cost vanishes in the sub-critical regime).
    """
    if spec.regime is not Regime.SUB:
        raise DomainError("the closed-form inequality check is for beta < 1")
    _require_nondegenerate(spec)
    times = np.asarray(times, dtype=float)
    r = np.array([macroscopic_current(phi, None, float(t), spec) for t in times])
    bound = rate_finite_dim(r, covariance_matrix(times, spec))
    return q_initial(phi, spec.rho), bound


def transport_inequality_check(phi: GridFunction, times, spec: VarianceSpec) -> bool:
    """True iff ``Q >= r^T A^{-1} r / 2 - 1e-9``."""
    q, bound = transport_terms(phi, times, spec)
    return q >= bound - TRANSPORT_TOL
