"""Real Gauss hypergeometric function and small normal-distribution helpers.

The hypergeometric evaluation is a plain power series, continued to the
negative half-line with Pfaff's transformation and to the neighbourhood of
z = 1 with Gauss's connection formula.  Everything is vectorised over ``z``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

SERIES_RTOL = 1e-15
SERIES_MAX_TERMS = 10_000

# Region boundaries: the raw series is used on [PFAFF_BELOW, CONNECT_ABOVE].
PFAFF_BELOW = -0.5
CONNECT_ABOVE = 0.9
# with integer c - a - b the connection formula is only accurate to ~1e-8,
# so the (slower) raw series is pushed closer to 1
LOG_CONNECT_ABOVE = 0.98


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def rgamma(x: float) -> float:
    """1/Gamma(x), zero at the poles."""
    if _is_nonpositive_int(x):
        return 0.0
    return 1.0 / math.gamma(x)


def _series(a, b, c, z):
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    # past this index the term ratio is monotone in k
    k_min = int(max(abs(a), abs(b), abs(c))) + 2
    for k in range(SERIES_MAX_TERMS):
        if a + k == 0 or b + k == 0:
            return total
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1.0))) * z
        total = total + np.where(active, term, 0.0)
        if k >= k_min:
            active &= np.abs(term) > SERIES_RTOL * np.abs(total)
            if not active.any():
                return total
    raise DomainError(
        f"hypergeometric series did not converge in {SERIES_MAX_TERMS} terms "
        f"(a={a}, b={b}, c={c}, max|z|={np.max(np.abs(z)):.6g})"
    )


def _near_one(a, b, c, z, w):
    # w = 1 - z, passed separately so that tiny complements keep their digits
    s = c - a - b
    if float(s).is_integer():
        # logarithmic case: average the two neighbouring non-degenerate
        # parameter sets, error O(eps**2) plus cancellation O(1e-16/eps)
        eps = 1e-5
        return 0.5 * (_near_one(a, b + eps, c, z, w) + _near_one(a, b - eps, c, z, w))
    g_c = math.gamma(c)
    c1 = g_c * math.gamma(s) * rgamma(c - a) * rgamma(c - b)
    c2 = g_c * math.gamma(-s) * rgamma(a) * rgamma(b)
    out = np.zeros_like(w)
    if c1 != 0.0:
        out = out + c1 * _series(a, b, 1.0 - s, w)
    if c2 != 0.0:
        out = out + c2 * w**s * _series(c - a, c - b, 1.0 + s, w)
    return out


def _positive_side(a, b, c, z, w):
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        return _series(a, b, c, z)  # polynomial, no continuation needed
    out = np.empty_like(z)
    log_case = float(c - a - b).is_integer()
    near = z > (LOG_CONNECT_ABOVE if log_case else CONNECT_ABOVE)
    if (~near).any():
        out[~near] = _series(a, b, c, z[~near])
    if near.any():
        out[near] = _near_one(a, b, c, z[near], w[near])
    return out


def hyp2f1(a: float, b: float, c: float, z):
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    Parameters
    ----------
    a, b, c : float
        Real parameters; ``c`` must not be a non-positive integer.
    z : float or array_like
        Argument(s), all strictly below 1.

    Notes
    -----
    Relative accuracy is about 1e-14 except in the logarithmic case
    (c - a - b an integer) for z > 0.98, or the same case after the Pfaff
    map (b - a an integer) for z < -49, where a symmetric parameter
    perturbation limits it to about 1e-8.

    Returns
    -------
    float or ndarray
        Same shape as ``z``.
    """
    if _is_nonpositive_int(c):
        raise DomainError(f"c={c} is a non-positive integer")
    zz = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(zz)):
        raise DomainError("non-finite argument")
    if np.any(zz >= 1.0):
        raise DomainError("argument must satisfy z < 1")
    scalar = zz.ndim == 0
    zz = np.atleast_1d(zz)
    if a == 0 or b == 0:
        out = np.ones_like(zz)
    elif _is_nonpositive_int(a) or _is_nonpositive_int(b):
        out = _series(a, b, c, zz)  # terminating polynomial
    else:
        out = np.empty_like(zz)
        neg = zz < PFAFF_BELOW
        if (~neg).any():
            zp = zz[~neg]
            out[~neg] = _positive_side(a, b, c, zp, 1.0 - zp)
        if neg.any():
            zn = zz[neg]
            # Pfaff: argument z/(z-1) in (1/3, 1), complement 1/(1-z)
            out[neg] = (1.0 - zn) ** (-a) * _positive_side(
                a, c - b, c, zn / (zn - 1.0), 1.0 / (1.0 - zn)
            )
    return float(out[0]) if scalar else out


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def norm_cdf(x):
    return ndtr(x)


def norm_sf(x):
    return ndtr(-np.asarray(x, dtype=float))
