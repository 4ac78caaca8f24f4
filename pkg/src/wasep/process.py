"""Exact simulation of the weakly asymmetric simple exclusion process.

The infinite lattice is replaced by a periodic ring of ``L`` sites labelled
``-L/2, ..., L/2 - 1``; site ``x`` lives at array index ``x mod L`` and the
bond ``(x, x+1)`` at index ``x mod L`` as well, so bond ``(-1, 0)`` is stored
at ``L - 1``.

Dynamics use uniformization with rejection: each particle attempts right
jumps at rate ``p = n**gamma (1/2 + alpha n**-beta)`` and left jumps at rate
``q = n**gamma / 2``; an attempt onto an occupied site is a null event.
Over an interval of length ``dt`` the number of attempts is
``Poisson(N (p + q) dt)`` and their order is all that matters for the state
at the end of the interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._kernel import run_attempts
from .errors import (
    DomainError,
    RingBreachError,
    SupportError,
    TaggedDisabledError,
    UntrackedBondError,
)

RING_FLOOR_C = 8.0
RING_MIN = 1024
CHUNK = 1 << 18
DEFAULT_AN_EXPONENT = 0.75


def ring_floor(n: int, alpha: float, horizon: float, c: float = RING_FLOOR_C) -> int:
    """Smallest admissible (even) ring: ``max(ceil(c n sqrt(T)), ceil(c alpha n T), 1024)``."""
    L = max(math.ceil(c * n * math.sqrt(horizon)), math.ceil(c * alpha * n * horizon), RING_MIN)
    return L + (L % 2)


@dataclass(frozen=True)
class ProcessParams:
    n: int
    alpha: float
    beta: float
    rho: float
    horizon: float = 1.0
    ring_size: int | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer")
        if self.alpha < 0 or self.beta < 0:
            raise DomainError("alpha and beta must be non-negative")
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError("rho must lie in [0, 1]")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        floor = ring_floor(self.n, self.alpha, self.horizon)
        if self.ring_size is None:
            object.__setattr__(self, "ring_size", floor)
        L = self.ring_size
        if int(L) != L or L % 2 or L < floor:
            raise DomainError(f"ring_size must be even and at least {floor}, got {L}")
        object.__setattr__(self, "ring_size", int(L))

    @property
    def gamma(self) -> float:
        return min(1.0 + self.beta, 2.0)

    @property
    def chi(self) -> float:
        return self.rho * (1.0 - self.rho)

    @property
    def rate_right(self) -> float:
        return self.n**self.gamma * (0.5 + self.alpha * self.n ** (-self.beta))

    @property
    def rate_left(self) -> float:
        return 0.5 * self.n**self.gamma

    @property
    def mean_speed(self) -> float:
        """``alpha n**(gamma - beta)``, the drift factor in the centring terms."""
        return self.alpha * self.n ** (self.gamma - self.beta)

    def site_index(self, x):
        return np.mod(x, self.ring_size)


@dataclass
class Configuration:
    occupancy: np.ndarray
    particle_count: int = -1

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=np.int8)
        if self.occupancy.ndim != 1 or np.any((self.occupancy != 0) & (self.occupancy != 1)):
            raise DomainError("occupancy must be a 1-d array of zeros and ones")
        count = int(self.occupancy.sum())
        if self.particle_count == -1:
            self.particle_count = count
        elif self.particle_count != count:
            raise DomainError("particle_count does not match occupancy")

    @property
    def size(self) -> int:
        return self.occupancy.size

    def eta(self, x):
        """Occupation at lattice site(s) ``x`` (signed labels)."""
        return self.occupancy[np.mod(x, self.size)]

    def copy(self) -> "Configuration":
        return Configuration(self.occupancy.copy(), self.particle_count)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(int(seed)))


def _bernoulli_config(params: ProcessParams, rng: np.random.Generator, tagged: bool) -> Configuration:
    occ = (rng.random(params.ring_size) < params.rho).astype(np.int8)
    if tagged:
        occ[0] = 1
    return Configuration(occ)


def sample_initial(params: ProcessParams, seed: int, tagged: bool = False) -> Configuration:
    """Bernoulli(rho) product configuration; with ``tagged`` site 0 is forced occupied."""
    return _bernoulli_config(params, make_rng(seed), tagged)


@dataclass
class SimState:
    """Configuration plus running observables.

    ``positions`` is the dense particle list (ring indices); with a tagged
    particle it sits at list index 0.  ``bond_current`` holds one counter per
    ring bond when ``track_all_bonds``, otherwise a single counter for bond
    (-1, 0).
    """

    config: Configuration
    time: float
    bond_current: np.ndarray
    tagged_position: int
    tagged_enabled: bool
    rng: np.random.Generator
    positions: np.ndarray = field(repr=False, default=None)
    track_all_bonds: bool = False

    def __post_init__(self):
        if self.positions is None:
            occ = self.config.occupancy
            pos = np.flatnonzero(occ).astype(np.int64)
            self.positions = pos  # site 0 (if occupied) comes first
        if self.tagged_enabled and self.positions[0] != np.mod(self.tagged_position, self.config.size):
            raise DomainError("tagged particle must be first in the particle list")

    def current(self, x: int) -> int:
        """Net crossings of bond ``(x, x+1)`` since time 0."""
        L = self.config.size
        b = int(np.mod(x, L))
        if self.track_all_bonds:
            return int(self.bond_current[b])
        if b == L - 1:
            return int(self.bond_current[0])
        raise UntrackedBondError(f"bond ({x}, {x + 1}) is not tracked")

    @property
    def origin_current(self) -> int:
        return self.current(-1)

    def copy(self) -> "SimState":
        rng = make_rng(0)
        rng.bit_generator.state = self.rng.bit_generator.state
        return SimState(
            self.config.copy(), self.time, self.bond_current.copy(), self.tagged_position,
            self.tagged_enabled, rng, self.positions.copy(), self.track_all_bonds,
        )


def new_state(
    params: ProcessParams, seed: int, tagged: bool = False, track_all_bonds: bool = False
) -> SimState:
    """Stationary start: initial configuration and dynamics share one generator."""
    rng = make_rng(seed)
    config = _bernoulli_config(params, rng, tagged)
    cur = np.zeros(params.ring_size if track_all_bonds else 1, dtype=np.int64)
    return SimState(config, 0.0, cur, 0, tagged, rng, track_all_bonds=track_all_bonds)


def advance(state: SimState, params: ProcessParams, t_target: float) -> SimState:
    """Evolve ``state`` in place to macroscopic time ``t_target`` and return it.

    Raises RingBreachError once the tagged particle has moved more than
    ``L/4`` sites from its start.
    """
    if t_target < state.time:
        raise DomainError("cannot advance backwards in time")
    if state.config.size != params.ring_size:
        raise DomainError("state and params disagree on the ring size")
    n_part = state.config.particle_count
    dt = t_target - state.time
    total_rate = params.rate_right + params.rate_left
    if n_part == 0 or n_part == params.ring_size or dt == 0:
        state.time = t_target
        return state
    rng = state.rng
    remaining = int(rng.poisson(n_part * total_rate * dt))
    p_right = params.rate_right / total_rate
    tag = 0 if state.tagged_enabled else -1
    full = 1 if state.track_all_bonds else 0
    limit = params.ring_size // 4
    occ = state.config.occupancy
    buf = np.empty(min(remaining, CHUNK))
    disp = state.tagged_position
    while remaining > 0:
        u = buf[: min(remaining, CHUNK)]
        rng.random(out=u)
        disp, done = run_attempts(
            u, n_part, p_right, occ, state.positions, state.bond_current, full, tag, disp, limit
        )
        remaining -= u.size
        if done < u.size:
            state.tagged_position = int(disp)
            raise RingBreachError(
                f"tagged particle moved {disp} sites on a ring of {params.ring_size}"
            )
    state.tagged_position = int(disp)
    state.time = t_target
    return state


def centered_current(state: SimState, params: ProcessParams) -> float:
    """``J_{-1,0}(t) - t alpha n**(gamma-beta) chi``."""
    return state.origin_current - state.time * params.mean_speed * params.chi


def centered_tagged(state: SimState, params: ProcessParams) -> float:
    """``X(t) - t alpha n**(gamma-beta) (1 - rho)``."""
    if not state.tagged_enabled:
        raise TaggedDisabledError("tagged particle was not enabled for this state")
    return state.tagged_position - state.time * params.mean_speed * (1.0 - params.rho)


# -- density fields --------------------------------------------------------

def _support_of(H, support):
    if support is None:
        support = getattr(H, "support", None)
    if support is None:
        raise SupportError("test function needs a declared compact support")
    lo, hi = float(support[0]), float(support[1])
    if not lo <= hi:
        raise SupportError("support must satisfy lo <= hi")
    return lo, hi


@dataclass(frozen=True)
class FieldProbe:
    """Lattice weights ``H(x/n)`` over the sites where ``H`` may be non-zero."""

    sites: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, H: Callable, params: ProcessParams, support=None) -> "FieldProbe":
        lo, hi = _support_of(H, support)
        half = params.ring_size / (2.0 * params.n)
        if lo <= -half or hi >= half:
            raise SupportError(
                f"support [{lo}, {hi}] does not fit in the ring window (-{half}, {half})"
            )
        n = params.n
        xs = np.arange(math.floor(lo * n), math.ceil(hi * n) + 1)
        w = np.asarray(H(xs / n), dtype=float)
        keep = w != 0.0
        return cls(np.mod(xs[keep], params.ring_size), w[keep])

    def centered_sum(self, config: Configuration, rho: float) -> float:
        return float(np.dot(config.occupancy[self.sites] - rho, self.weights))


def fluctuation_field(config: Configuration, H: Callable, params: ProcessParams, support=None) -> float:
    """``n**-1/2 sum_x (eta_x - rho) H(x/n)``."""
    probe = FieldProbe.build(H, params, support)
    return probe.centered_sum(config, params.rho) / math.sqrt(params.n)


def default_an(n: int, exponent: float = DEFAULT_AN_EXPONENT) -> float:
    return float(n) ** exponent


def rescaled_field(
    config: Configuration, H: Callable, params: ProcessParams, a_n: float | None = None, support=None
) -> float:
    """``a_n**-1 sum_x (eta_x - rho) H(x/n)``; ``a_n`` defaults to ``n**0.75``."""
    if a_n is None:
        a_n = default_an(params.n)
    if not a_n > 0:
        raise DomainError("a_n must be positive")
    probe = FieldProbe.build(H, params, support)
    return probe.centered_sum(config, params.rho) / a_n


# -- exact lattice identities ------------------------------------------------

def conservation_identity_check(state_t: SimState, state_0: SimState, params: ProcessParams, l: int) -> bool:
    """Exact check of the mass balance for the ramp ``G_l``.

    Multiplied by ``M = n l`` both sides are integers:
    ``sum_{x<M} (M - x)(eta_x(t) - eta_x(0)) = M J_{-1,0} - sum_{x<M} J_{x,x+1}``
    with currents counted between the two states.
    """
    if not (state_t.track_all_bonds and state_0.track_all_bonds):
        raise UntrackedBondError("the conservation identity needs every bond tracked")
    M = params.n * int(l)
    L = params.ring_size
    if not 0 < M < L // 2:
        raise DomainError("need 0 < n l < L/2")
    x = np.arange(M)
    d_eta = state_t.config.occupancy[:M].astype(np.int64) - state_0.config.occupancy[:M]
    lhs = int(np.dot(M - x, d_eta))
    d_cur = state_t.bond_current - state_0.bond_current
    rhs = M * int(d_cur[L - 1]) - int(d_cur[:M].sum())
    return lhs == rhs


def tagged_current_identity_check(state: SimState, params: ProcessParams) -> bool:
    """Order preservation: ``J_{-1,0} = sum_{0<=x<X} eta_x`` for ``X >= 0``, and
    ``J_{-1,0} = -sum_{X<=x<0} eta_x`` otherwise."""
    if not state.tagged_enabled:
        raise TaggedDisabledError("tagged particle was not enabled for this state")
    X = state.tagged_position
    L = params.ring_size
    if abs(X) >= L // 2:
        raise RingBreachError(f"|X| = {abs(X)} reaches half the ring")
    J = state.origin_current
    if X >= 0:
        expected = int(state.config.eta(np.arange(0, X)).sum())
    else:
        expected = -int(state.config.eta(np.arange(X, 0)).sum())
    return J == expected


# -- per-replica observable series -------------------------------------------

@dataclass
class ObservableSeries:
    sample_times: np.ndarray
    centered_current: np.ndarray
    centered_tagged: np.ndarray | None
    field_values: dict[str, np.ndarray]
    replica_id: int
    seed: int
    breached: bool = False

    def __post_init__(self):
        t = np.asarray(self.sample_times, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise DomainError("sample_times must be strictly increasing")
        self.sample_times = t


def simulate_series(
    params: ProcessParams,
    seed: int,
    sample_times: Sequence[float],
    tagged: bool = False,
    probes: Mapping[str, FieldProbe] | None = None,
    field_scale: float | None = None,
    replica_id: int = 0,
) -> ObservableSeries:
    """One replica: start stationary and record observables at ``sample_times``.

    Field pairings are ``sum (eta_x - rho) H(x/n) / field_scale`` with
    ``field_scale`` defaulting to ``sqrt(n)``.  A ring breach marks the
    series (remaining entries NaN) instead of raising.
    """
    times = np.asarray(sample_times, dtype=float)
    if times.size and (times[0] < 0 or times[-1] > params.horizon):
        raise DomainError("sample times must lie in [0, horizon]")
    probes = dict(probes or {})
    scale = math.sqrt(params.n) if field_scale is None else float(field_scale)
    state = new_state(params, seed, tagged=tagged)
    cur = np.full(times.size, np.nan)
    tag = np.full(times.size, np.nan) if tagged else None
    fields = {name: np.full(times.size, np.nan) for name in probes}
    breached = False
    for i, t in enumerate(times):
        try:
            advance(state, params, t)
        except RingBreachError:
            breached = True
            break
        cur[i] = centered_current(state, params)
        if tagged:
            tag[i] = centered_tagged(state, params)
        for name, probe in probes.items():
            fields[name][i] = probe.centered_sum(state.config, params.rho) / scale
    return ObservableSeries(times, cur, tag, fields, replica_id, int(seed), breached)
