"""Replica orchestration.

Replica ``i`` of an experiment with master seed ``S`` uses the 64-bit seed
``SeedSequence(entropy=S, spawn_key=(i,)).generate_state(1, uint64)[0]``,
so results do not depend on execution order or on the number of workers.
"""
from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..process import FieldProbe, ObservableSeries, ProcessParams, simulate_series
from .config import ExperimentConfig
from .stats import EstimateReport, estimate_covariance

WORKERS_ENV = "WASEP_WORKERS"
RESCALED_SUFFIX = "@a_n"


def replica_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _probes(config: ExperimentConfig, params: ProcessParams) -> dict[str, FieldProbe]:
    if not config.observables.get("field"):
        return {}
    return {f.name: FieldProbe.build(f.build(), params) for f in config.field_test_functions}


def _run_block(args) -> list[ObservableSeries]:
    params, indices, master, times, tagged, probes, rescale = args
    out = []
    for i in indices:
        s = simulate_series(params, replica_seed(master, i), times, tagged, probes, replica_id=i)
        for name in list(s.field_values):
            s.field_values[name + RESCALED_SUFFIX] = s.field_values[name] * rescale
        out.append(s)
    return out


def run_replicas(
    config: ExperimentConfig, params: ProcessParams | None = None, workers: int | None = None
) -> list[ObservableSeries]:
    """All replicas of ``config`` (optionally on other ``params``), in index order."""
    params = params or config.process
    workers = workers or default_workers()
    probes = _probes(config, params)
    # rescaled field = Y^n * sqrt(n) / a_n
    rescale = float(np.sqrt(params.n)) / config.a_n
    idx = np.arange(config.replicas)
    n_blocks = 1 if workers == 1 else min(config.replicas, 4 * workers)
    blocks = [b.tolist() for b in np.array_split(idx, n_blocks)]
    jobs = [
        (params, b, config.master_seed, config.sample_times, config.tagged, probes, rescale)
        for b in blocks
    ]
    if workers == 1:
        results = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, jobs))
    return [s for block in results for s in block]


@dataclass
class RingDoublingReport:
    ring_sizes: tuple[int, int]
    comparisons: list[dict]
    agree: bool


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    series: list[ObservableSeries]
    breaches: int
    ring_doubling: RingDoublingReport | None = None
    estimates: list[EstimateReport] = field(default_factory=list)


def _variance_estimates(series, params, observable):
    m = series[0].sample_times.size
    return [estimate_covariance(series, i, i, params, observable) for i in range(m)]


def ring_doubling(config: ExperimentConfig, series, workers=None, n_se: float = 4.0) -> RingDoublingReport:
    """Re-run at twice the ring size with the same seeds and compare variances."""
    big = dataclasses.replace(config.process, ring_size=2 * config.process.ring_size)
    other = run_replicas(config, big, workers)
    observables = ["current"] + (["tagged"] if config.tagged else [])
    comparisons = []
    agree = True
    for obs in observables:
        for a, b in zip(_variance_estimates(series, config.process, obs),
                        _variance_estimates(other, big, obs)):
            se = float(np.hypot(a.std_error, b.std_error))
            z = 0.0 if se == 0 else (a.estimate - b.estimate) / se
            ok = abs(z) <= n_se
            agree &= ok
            comparisons.append({"estimator": a.estimator, "L": a.estimate, "2L": b.estimate,
                                "combined_se": se, "z": z, "agree": ok})
    return RingDoublingReport((config.process.ring_size, big.ring_size), comparisons, agree)


def run_ensemble(config: ExperimentConfig, workers: int | None = None) -> EnsembleResult:
    series = run_replicas(config, workers=workers)
    breaches = sum(s.breached for s in series)
    result = EnsembleResult(config, series, breaches)
    usable = len(series) - breaches
    if usable >= 3:
        params = config.process
        m = len(config.sample_times)
        pairs = [(i, j) for i in range(m) for j in range(i, m)]
        for obs in ["current"] + (["tagged"] if config.tagged else []):
            result.estimates += [estimate_covariance(series, i, j, params, obs) for i, j in pairs]
    if config.ring_doubling_check:
        result.ring_doubling = ring_doubling(config, series, workers)
    return result
