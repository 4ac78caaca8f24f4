"""Piecewise-linear functions on the line and on time grids.

``GridFunction`` stores one linear piece per cell and allows jumps at the
knots, so the ramp ``G_l`` (which jumps at the origin) is represented
exactly.  Inner products, shifts and autocorrelations are computed exactly
on the merged knot sets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

DEFAULT_H = 1.0 / 64.0


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Compactly supported piecewise-linear function, zero off its knots.

    Cell ``i`` spans ``[knots[i], knots[i+1]]`` and interpolates linearly
    from ``left[i]`` to ``right[i]``.  Point evaluation is right-continuous.
    """

    knots: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        left = np.asarray(self.left, dtype=float)
        right = np.asarray(self.right, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if left.shape != (knots.size - 1,) or right.shape != left.shape:
            raise ValueError("one left/right value per cell")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_samples(cls, knots, values) -> "GridFunction":
        """Continuous interpolant through ``values`` at ``knots``."""
        values = np.asarray(values, dtype=float)
        return cls(knots, values[:-1], values[1:])

    @classmethod
    def from_callable(
        cls, func: Callable, support: tuple[float, float], h: float = DEFAULT_H
    ) -> "GridFunction":
        lo, hi = support
        cells = max(1, int(np.ceil((hi - lo) / h - 1e-9)))
        knots = np.linspace(lo, hi, cells + 1)
        return cls.from_samples(knots, np.asarray(func(knots), dtype=float))

    @classmethod
    def zero(cls) -> "GridFunction":
        return cls(np.array([0.0, 1.0]), np.zeros(1), np.zeros(1))

    # -- basic properties -------------------------------------------------
    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.knots)

    @property
    def slopes(self) -> np.ndarray:
        return (self.right - self.left) / self.widths

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        k = self.knots
        idx = np.searchsorted(k, u, side="right") - 1
        inside = (idx >= 0) & (idx < k.size - 1)
        last = u == k[-1]
        i = np.clip(idx, 0, k.size - 2)
        frac = (u - k[i]) / (k[i + 1] - k[i])
        val = self.left[i] + frac * (self.right[i] - self.left[i])
        out = np.where(inside, val, 0.0)
        out = np.where(last, self.right[-1], out)
        return out if out.ndim else float(out)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.knots, c * self.left, c * self.right)

    def shifted(self, c: float) -> "GridFunction":
        """The function ``u -> self(u - c)``."""
        return GridFunction(self.knots + c, self.left, self.right)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        knots, a_l, a_r, b_l, b_r = _merge(self, other)
        return GridFunction(knots, a_l + b_l, a_r + b_r)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self + other.scaled(-1.0)

    # -- integrals ----------------------------------------------------------
    def integral(self, a: float = -np.inf, b: float = np.inf) -> float:
        """Oriented integral over ``[a, b]`` (negative when ``b < a``)."""
        if b < a:
            return -self.integral(b, a)
        k = self.knots
        lo = np.clip(k[:-1], a, b)
        hi = np.clip(k[1:], a, b)
        mask = hi > lo
        if not mask.any():
            return 0.0
        slope = self.slopes[mask]
        f_lo = self.left[mask] + slope * (lo[mask] - k[:-1][mask])
        f_hi = self.left[mask] + slope * (hi[mask] - k[:-1][mask])
        return float(np.sum(0.5 * (f_lo + f_hi) * (hi[mask] - lo[mask])))

    def inner(self, other: "GridFunction") -> float:
        """Exact L2 inner product."""
        knots, a_l, a_r, b_l, b_r = _merge(self, other)
        w = np.diff(knots)
        # Simpson is exact for the quadratic product on each cell
        mid = 0.25 * (a_l + a_r) * (b_l + b_r)
        return float(np.sum(w * (a_l * b_l + 4.0 * mid + a_r * b_r) / 6.0))

    def norm2(self) -> float:
        """Squared L2 norm."""
        return self.inner(self)

    def gradient_norm2(self) -> float:
        """Integral of the squared a.e. derivative (jumps carry no weight)."""
        return float(np.sum(self.slopes**2 * self.widths))

    def autocorrelation(self, w) -> np.ndarray | float:
        """``A(w) = integral of G(u) G(u + w) du``; even in ``w``."""
        ws = np.atleast_1d(np.asarray(w, dtype=float))
        lo, hi = self.support
        out = np.empty_like(ws)
        for i, wi in enumerate(ws):
            out[i] = 0.0 if abs(wi) >= hi - lo else self.inner(self.shifted(-wi))
        return out if np.ndim(w) else float(out[0])

    def integrate_weighted(
        self, weight: Callable, breakpoints: Sequence[float] = (), max_width: float = 0.05,
        order: int = 20,
    ) -> float:
        """Integral of ``self(u) * weight(u)`` by per-cell Gauss-Legendre.

        ``weight`` must be smooth inside every cell once the cells are split
        at ``breakpoints``; cells are subdivided to at most ``max_width``.
        """
        lo, hi = self.support
        cuts = np.unique(
            np.concatenate([self.knots, [b for b in breakpoints if lo < b < hi]])
        )
        pieces_lo, pieces_hi = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            m = max(1, int(np.ceil((b - a) / max_width)))
            edges = np.linspace(a, b, m + 1)
            pieces_lo.append(edges[:-1])
            pieces_hi.append(edges[1:])
        a = np.concatenate(pieces_lo)
        b = np.concatenate(pieces_hi)
        x, wts = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (b - a)
        nodes = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
        # evaluate each piece from its own cell so jumps at knots are respected
        cell = np.clip(np.searchsorted(self.knots, 0.5 * (a + b), side="right") - 1,
                       0, self.knots.size - 2)
        k0 = self.knots[cell][:, None]
        f = self.left[cell][:, None] + self.slopes[cell][:, None] * (nodes - k0)
        vals = f * np.asarray(weight(nodes), dtype=float)
        return float(np.sum(half[:, None] * wts[None, :] * vals))


def _merge(f: GridFunction, g: GridFunction):
    """Common refinement: knots plus left/right values of both functions."""
    knots = np.union1d(f.knots, g.knots)
    a = knots[:-1]
    b = knots[1:]

    def ends(h: GridFunction):
        mid = 0.5 * (a + b)
        idx = np.searchsorted(h.knots, mid, side="right") - 1
        inside = (idx >= 0) & (idx < h.knots.size - 1)
        i = np.clip(idx, 0, h.knots.size - 2)
        s = h.slopes[i]
        x0 = h.knots[i]
        vl = np.where(inside, h.left[i] + s * (a - x0), 0.0)
        vr = np.where(inside, h.left[i] + s * (b - x0), 0.0)
        return vl, vr

    f_l, f_r = ends(f)
    g_l, g_r = ends(g)
    return knots, f_l, f_r, g_l, g_r


# -- the test functions used throughout -----------------------------------

def ramp_G(l: float) -> GridFunction:
    """``G_l(u) = (1 - u/l) 1{0 <= u <= l}``, exact (jump of height 1 at 0)."""
    if l <= 0:
        raise ValueError("l must be positive")
    return GridFunction(np.array([0.0, float(l)]), np.array([1.0]), np.array([0.0]))


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


_BUMP_MASS = quad(lambda x: float(_bump(x)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-12)[0]


def mollifier_width(l: float) -> float:
    """Half-width of the bump used to smooth ``G_l``.

    Scales like ``l**-2`` so that the L2 distance to ``G_l`` decays like
    ``1/l`` (a jump smoothed over width ``e`` costs about ``sqrt(e)``).
    """
    return 1.0 / float(l) ** 2


def smooth_ramp_G(l: float, cells_per_window: int = 64) -> GridFunction:
    """``G_l`` convolved with a smooth compact bump of half-width ``1/l**2``.

    Off the two smoothing windows the convolution equals ``G_l`` exactly
    (a linear function is preserved by a symmetric mollifier), so those
    parts are single cells; each window is resolved by a fine uniform grid.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    l = float(l)
    eps = mollifier_width(l)
    g = ramp_G(l)

    def smoothed(u: float) -> float:
        # integral of psi_eps(y) G_l(u - y) dy, kinks of the integrand at u and u - l
        pts = [p for p in (u, u - l) if -eps < p < eps]
        val, _ = quad(
            lambda y: float(_bump(y / eps)) * float(g(u - y)),
            -eps, eps, points=pts or None, epsabs=1e-15, epsrel=1e-13, limit=200,
        )
        return val / (eps * _BUMP_MASS)

    windows = [
        np.linspace(-eps, eps, cells_per_window + 1),
        np.linspace(l - eps, l + eps, cells_per_window + 1),
    ]
    knots = np.unique(np.concatenate(windows))
    values = np.array([smoothed(u) for u in knots])
    # the outermost knots sit where the convolution vanishes
    values[0] = 0.0
    values[-1] = 0.0
    return GridFunction.from_samples(knots, values)


def gaussian_bump(
    center: float, width: float, mass: float = 1.0, h: float = DEFAULT_H, cutoff: float = 8.0
) -> GridFunction:
    """Gaussian profile of total mass ``mass`` truncated at ``cutoff`` widths."""
    lo, hi = center - cutoff * width, center + cutoff * width
    step = min(h, width / 16.0)
    norm = mass / (width * np.sqrt(2.0 * np.pi))
    return GridFunction.from_callable(
        lambda u: norm * np.exp(-0.5 * ((u - center) / width) ** 2), (lo, hi), step
    )


def compact_bump(center: float, radius: float, mass: float = 1.0, cells: int = 256) -> GridFunction:
    """Smooth bump supported on ``[center - radius, center + radius]``.

    The interpolant is renormalised so that its integral is exactly ``mass``.
    """
    knots = center + radius * np.linspace(-1.0, 1.0, cells + 1)
    shape = _bump((knots - center) / radius)
    f = GridFunction.from_samples(knots, shape)
    return f.scaled(mass / f.integral())


@dataclass(frozen=True, eq=False)
class SpaceTimeGridFunction:
    """Time slices of spatial grid functions, linear in time between slices."""

    times: np.ndarray
    slices: tuple[GridFunction, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size != len(self.slices) or times.size < 1:
            raise ValueError("one slice per time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "slices", tuple(self.slices))

    @classmethod
    def constant(cls, g: GridFunction, horizon: float) -> "SpaceTimeGridFunction":
        return cls(np.array([0.0, horizon]), (g, g))

    def at(self, s: float) -> GridFunction:
        t = self.times
        if s <= t[0]:
            return self.slices[0]
        if s >= t[-1]:
            return self.slices[-1]
        j = int(np.searchsorted(t, s, side="right")) - 1
        lam = (s - t[j]) / (t[j + 1] - t[j])
        return self.slices[j].scaled(1.0 - lam) + self.slices[j + 1].scaled(lam)

    def dirichlet_form(self) -> float:
        """``[G, G]``: time integral of the squared spatial gradient norm.

        Exact for slices that are linear in time (the integrand is then
        quadratic in time on each interval, so Simpson's rule is exact).
        """
        if self.times.size == 1:
            return 0.0
        total = 0.0
        for j in range(self.times.size - 1):
            a, b = self.slices[j], self.slices[j + 1]
            mid = a.scaled(0.5) + b.scaled(0.5)
            dt = self.times[j + 1] - self.times[j]
            total += dt * (a.gradient_norm2() + 4.0 * mid.gradient_norm2()
                           + b.gradient_norm2()) / 6.0
        return total


@dataclass(frozen=True, eq=False)
class GridPath:
    """Real path sampled at increasing times, read as its linear interpolant."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValueError("times and values must be 1-d of equal length")
        if times.size and (times[0] < 0 or np.any(np.diff(times) <= 0)):
            raise ValueError("times must be non-negative and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func: Callable, horizon: float, m: int) -> "GridPath":
        t = np.linspace(0.0, horizon, m + 1)
        return cls(t, np.asarray(func(t), dtype=float))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.times)
