"""Ensemble estimators with jackknife standard errors."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError
from ..process import ObservableSeries, ProcessParams
from ..theory import VarianceSpec, variance_a


@dataclass(frozen=True)
class EstimateReport:
    estimator: str
    estimate: float
    std_error: float
    replicas: int
    theory: float | None = None

    @property
    def z_score(self) -> float | None:
        if self.theory is None:
            return None
        if self.std_error == 0.0:
            return 0.0 if self.estimate == self.theory else math.copysign(math.inf, self.estimate - self.theory)
        return (self.estimate - self.theory) / self.std_error

    def within(self, n_se: float = 4.0) -> bool:
        z = self.z_score
        return z is not None and abs(z) <= n_se

    def to_dict(self) -> dict:
        d = asdict(self)
        d["z_score"] = self.z_score
        return d


def jackknife_covariance(x, y) -> tuple[float, float]:
    """Sample covariance (ddof=1) and its jackknife standard error, in O(R)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = x.size
    if R < 3:
        raise DomainError("need at least 3 replicas for a jackknife covariance")
    dx = x - x.mean()
    dy = y - y.mean()
    s = float(dx @ dy)
    cov = s / (R - 1)
    # leave-one-out: removing k shifts the centred cross-product by R/(R-1) dx_k dy_k
    loo = (s - R / (R - 1) * dx * dy) / (R - 2)
    se = math.sqrt((R - 1) / R * float(np.sum((loo - loo.mean()) ** 2)))
    return cov, se


def jackknife_mean(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _stack(series: Sequence[ObservableSeries], observable: str) -> np.ndarray:
    rows = []
    for s in series:
        if s.breached:
            continue
        if observable == "current":
            rows.append(s.centered_current)
        elif observable == "tagged":
            if s.centered_tagged is None:
                raise DomainError("series carry no tagged observable")
            rows.append(s.centered_tagged)
        else:
            rows.append(s.field_values[observable])
    if not rows:
        raise DomainError("no usable replicas")
    return np.vstack(rows)


def estimate_covariance(
    series: Sequence[ObservableSeries],
    i: int,
    j: int,
    params: ProcessParams | None = None,
    observable: str = "current",
) -> EstimateReport:
    """Covariance of ``observable / sqrt(n)`` between sample times ``i`` and ``j``.

    With ``params`` the limiting value is attached: ``a(t_i, t_j)`` for the
    current and ``a(t_i, t_j) / rho**2`` for the tagged particle.
    Breached replicas are skipped.
    """
    if len(series) < 2:
        raise DomainError("need at least two replicas")
    data = _stack(series, observable)
    times = series[0].sample_times
    scale = 1.0
    theory = None
    if params is not None:
        scale = 1.0 / math.sqrt(params.n)
        if observable in ("current", "tagged"):
            spec = VarianceSpec.from_beta(params.alpha, params.beta, params.rho)
            theory = float(variance_a(times[i], times[j], spec))
            if observable == "tagged":
                theory /= params.rho**2
    cov, se = jackknife_covariance(data[:, i] * scale, data[:, j] * scale)
    name = f"cov[{observable}]({times[i]:g},{times[j]:g})"
    return EstimateReport(name, cov, se, data.shape[0], theory)


def covariance_reports(series, params: ProcessParams, observable: str = "current") -> list[EstimateReport]:
    m = series[0].sample_times.size
    return [estimate_covariance(series, i, j, params, observable) for i in range(m) for j in range(i, m)]
