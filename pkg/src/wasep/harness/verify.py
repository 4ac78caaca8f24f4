"""Verification suites: exact identities, kernel quadrature, covariances,
rate-function consistency and the initial-cost inequality.

Every suite returns a ``SuiteReport`` listing each sub-check with its value,
target, tolerance and verdict.  ``quick=True`` cuts replica and sample
counts tenfold for smoke runs.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..gridfunc import GridFunction, GridPath, compact_bump, gaussian_bump, smooth_ramp_G
from ..process import (
    ProcessParams,
    advance,
    conservation_identity_check,
    new_state,
    tagged_current_identity_check,
)
from ..rates import (
    dyadic_grids,
    grid_rate_sequence,
    transport_terms,
    rate_beta1_grid,
    rate_path_sub,
    rate_path_super,
)
from ..theory import (
    VarianceSpec,
    covariance_matrix,
    f_drift,
    fbm_cov,
    field_cov_increment,
    kernel_cov_integral,
    sample_gaussian_paths,
    variance_a,
)
from .config import ExperimentConfig
from .ensemble import replica_seed, run_replicas
from .stats import covariance_reports, estimate_covariance, jackknife_covariance, jackknife_mean

SUITES = ("identities", "kernel", "covariance", "rates", "inequality")
MASTER_SEED = 0x5EED_2024


@dataclass
class Check:
    name: str
    value: float
    target: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    name: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, target, tolerance, passed, detail=""):
        self.checks.append(Check(name, float(value), float(target), float(tolerance), bool(passed), detail))

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks]}


# -- individual criteria, shared with the test-suite ---------------------------

def identity_pass_rate(replicas: int = 100, n_times: int = 10, seed: int = MASTER_SEED):
    """Conservation and tagged-order identities over ``replicas`` runs."""
    params = ProcessParams(n=50, alpha=1.0, beta=2.0, rho=0.3, horizon=0.5)
    times = np.linspace(params.horizon / n_times, params.horizon, n_times)
    cons = order = 0
    for r in range(replicas):
        s0 = new_state(params, replica_seed(seed, r), tagged=True, track_all_bonds=True)
        s = s0.copy()
        for t in times:
            advance(s, params, t)
            cons += conservation_identity_check(s, s0, params, 2)
            order += tagged_current_identity_check(s, params)
    total = replicas * n_times
    return cons, order, total


def kernel_errors(grid=(0.4, 0.8, 1.2, 1.6, 2.0)) -> tuple[float, float]:
    """Max error of the kernel integral against the fBm covariance on the grid
    and of the variance ``int K(t,u)^2 du`` against ``sqrt(t)``."""
    err = 0.0
    for t in grid:
        for s in grid:
            hi, lo = max(t, s), min(t, s)
            err = max(err, abs(kernel_cov_integral(hi, lo) - fbm_cov(t, s)))
    var_err = max(abs(kernel_cov_integral(t, t) - math.sqrt(t)) for t in (0.5, 1.0, 2.0))
    return err, var_err


_SEED_OFFSET = {"current": 0, "tagged": 1, "sub": 2}


def ensemble_config(kind: str, replicas: int, seed: int = MASTER_SEED) -> ExperimentConfig:
    if kind in ("current", "tagged"):
        proc = {"n": 200, "alpha": 1.0, "beta": 2.0, "rho": 0.3, "horizon": 1.0, "ring_size": 1600}
        times = [0.25, 0.5, 1.0]
    elif kind == "sub":
        proc = {"n": 100, "alpha": 1.0, "beta": 0.5, "rho": 0.3, "horizon": 1.0}
        times = [0.5, 1.0]
    else:
        raise ValueError(kind)
    return ExperimentConfig.from_dict({
        "process": proc, "replicas": replicas, "master_seed": seed + _SEED_OFFSET[kind],
        "sample_times": times,
        "observables": {"current": True, "tagged": kind == "tagged"},
    })


def f_drift_mc(m: float, t: float, samples: int, rng) -> tuple[float, float]:
    b = rng.standard_normal(samples) * math.sqrt(t)
    x = 0.5 * m * t + np.maximum(b - m * t, 0.0)
    return jackknife_mean(x)


def sampler_estimates(samples: int, seed: int = MASTER_SEED):
    spec = VarianceSpec(1.0, 0.3, "super")
    cov = covariance_matrix([0.5, 1.0], spec)
    x = sample_gaussian_paths(cov, seed, samples)
    out = []
    for i, j in ((0, 0), (0, 1), (1, 1)):
        c, se = jackknife_covariance(x[:, i], x[:, j])
        out.append((i, j, c, se, cov.entries[i, j]))
    return out


def smooth_test_path(horizon: float = 1.0, m: int = 4096) -> GridPath:
    return GridPath.from_function(lambda t: np.sin(2.0 * t) + t * t, horizon, m)


def saturating_profile(spec: VarianceSpec, t_last: float) -> GridFunction:
    """Indicator of the transport window ``[-v t_last, 0]``: the single
    constraint at ``t_last`` saturates Cauchy-Schwarz."""
    c = spec.velocity * t_last
    return GridFunction(np.array([-c, 0.0]), np.array([1.0]), np.array([1.0]))


def random_profiles(count: int, seed: int = MASTER_SEED):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        if rng.random() < 0.5:
            yield gaussian_bump(rng.uniform(-1.0, 0.5), rng.uniform(0.05, 0.5), rng.normal())
        else:
            yield compact_bump(rng.uniform(-1.0, 0.5), rng.uniform(0.05, 0.6), rng.normal())


# -- suites ----------------------------------------------------------------------

def suite_identities(quick: bool = False) -> SuiteReport:
    rep = SuiteReport("identities")
    cons, order, total = identity_pass_rate(10 if quick else 100)
    rep.add("conservation identity pass rate", cons / total, 1.0, 0.0, cons == total, f"{cons}/{total}")
    rep.add("tagged-order identity pass rate", order / total, 1.0, 0.0, order == total, f"{order}/{total}")
    return rep


def suite_kernel(quick: bool = False) -> SuiteReport:
    rep = SuiteReport("kernel")
    err, var_err = kernel_errors()
    rep.add("max |int K K - fbm_cov| on 5x5 grid", err, 0.0, 1e-6, err <= 1e-6)
    rep.add("max |int K^2 - sqrt(t)|", var_err, 0.0, 1e-6, var_err <= 1e-6)
    return rep


def suite_covariance(quick: bool = False) -> SuiteReport:
    rep = SuiteReport("covariance")
    div = 10 if quick else 1
    for kind, obs in (("current", "current"), ("tagged", "tagged")):
        cfg = ensemble_config(kind, 2000 // div)
        series = run_replicas(cfg)
        for e in covariance_reports(series, cfg.process, obs):
            rep.add(e.estimator, e.estimate, e.theory, 4 * e.std_error, e.within(4.0), f"z={e.z_score:+.2f}")
    cfg = ensemble_config("sub", 2000 // div)
    series = run_replicas(cfg)
    for i in range(len(cfg.sample_times)):
        e = estimate_covariance(series, i, i, cfg.process)
        rep.add("sub " + e.estimator, e.estimate, e.theory, 4 * e.std_error, e.within(4.0), f"z={e.z_score:+.2f}")
    rng = np.random.default_rng(MASTER_SEED)
    for m in (0.0, 0.4, 1.0):
        for t in (0.5, 1.0, 2.0):
            mean, se = f_drift_mc(m, t, 10**6 // div, rng)
            target = f_drift(t, m)
            rep.add(f"f_drift(m={m:g}, t={t:g})", mean, target, 4 * se, abs(mean - target) <= 4 * se)
    g = smooth_ramp_G(64)
    for regime in ("super", "sub"):
        spec = VarianceSpec(1.0, 0.3, regime)
        for t, s in ((1.0, 1.0), (1.0, 0.5)):
            v = field_cov_increment(g, t, s, spec)
            a = variance_a(t, s, spec)
            rel = abs(v / a - 1.0)
            rep.add(f"field cov l=64 {regime} ({t:g},{s:g})", v, a, 0.02 * a, rel <= 0.02, f"rel={rel:.2e}")
    for i, j, c, se, target in sampler_estimates(10**5 // div):
        rep.add(f"sampler cov({i},{j})", c, target, 4 * se, abs(c - target) <= 4 * se)
    return rep


def suite_rates(quick: bool = False) -> SuiteReport:
    rep = SuiteReport("rates")
    sub = VarianceSpec(1.0, 0.3, "sub")
    sup = VarianceSpec(1.0, 0.3, "super")
    h = smooth_test_path()
    sizes = [2**k for k in range(1, 9)]
    seq = grid_rate_sequence(h, dyadic_grids(1.0, sizes), sub)
    exact = rate_path_sub(h, sub)
    mono = bool(np.all(np.diff(seq) >= -1e-12 * exact))
    rep.add("sub grid forms monotone", float(mono), 1.0, 0.0, mono)
    rel = abs(seq[-1] / exact - 1.0)
    rep.add("sub grid form m=256 vs path rate", seq[-1], exact, 0.01 * exact, rel <= 0.01, f"rel={rel:.2e}")
    hdot = GridPath.from_function(np.ones_like, 1.0, 256)
    rate, path = rate_path_super(hdot, sup)
    form = grid_rate_sequence(path, [path.times[1:]], sup)[0]
    rel = abs(form / rate - 1.0)
    rep.add("super grid form vs rate, hdot=1", form, rate, 0.02 * rate, rel <= 0.02, f"rel={rel:.2e}")
    crit0 = VarianceSpec(0.0, 0.3, "critical")
    grids = dyadic_grids(1.0, [2, 8, 32, 128])
    vals, _, _ = rate_beta1_grid(path, grids, crit0)
    ref = grid_rate_sequence(path, grids, sup)
    diff = float(np.max(np.abs(vals - ref)))
    rep.add("critical alpha=0 vs super grid forms", diff, 0.0, 1e-10, diff <= 1e-10)
    return rep


def suite_inequality(quick: bool = False) -> SuiteReport:
    rep = SuiteReport("inequality")
    spec = VarianceSpec(1.0, 0.3, "sub")
    times = [0.5, 1.0]
    count = 10 if quick else 100
    ok = 0
    worst = math.inf
    for phi in random_profiles(count):
        q, bound = transport_terms(phi, times, spec)
        ok += q >= bound - 1e-9
        worst = min(worst, q - bound)
    rep.add("random profiles satisfying Q >= r'A^-1 r/2", ok / count, 1.0, 0.0, ok == count,
            f"{ok}/{count}, min gap {worst:.3e}")
    q, bound = transport_terms(saturating_profile(spec, times[-1]), times, spec)
    gap = (q - bound) / q
    rep.add("saturating profile relative gap", gap, 0.0, 0.05, -1e-9 <= gap <= 0.05)
    return rep


_SUITE_FUNCS = {
    "identities": suite_identities,
    "kernel": suite_kernel,
    "covariance": suite_covariance,
    "rates": suite_rates,
    "inequality": suite_inequality,
}


def verify_suite(name: str, quick: bool = False) -> SuiteReport:
    if name not in _SUITE_FUNCS:
        raise KeyError(f"unknown suite {name!r}; expected one of {SUITES}")
    start = time.perf_counter()
    rep = _SUITE_FUNCS[name](quick)
    rep.seconds = time.perf_counter() - start
    return rep
