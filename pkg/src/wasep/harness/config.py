"""Experiment configuration, loaded from JSON.

Example::

    {
      "process": {"n": 200, "alpha": 1.0, "beta": 2.0, "rho": 0.3, "horizon": 1.0},
      "replicas": 2000,
      "master_seed": 20240601,
      "sample_times": [0.25, 0.5, 1.0],
      "observables": {"current": true, "tagged": false, "field": false},
      "field_test_functions": [{"kind": "smooth_ramp", "l": 4}],
      "a_n_rule": {"exponent": 0.75},
      "ring_doubling_check": false,
      "output_path": "runs/super"
    }

``process.ring_size`` is optional and defaults to the ring floor.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError, DomainError
from ..gridfunc import GridFunction, compact_bump, gaussian_bump, ramp_G, smooth_ramp_G
from ..process import DEFAULT_AN_EXPONENT, ProcessParams

OBSERVABLES = ("current", "tagged", "field")


@dataclass(frozen=True)
class TestFunctionSpec:
    kind: str
    params: dict
    name: str

    __test__ = False  # not a pytest class

    KINDS = ("ramp", "smooth_ramp", "gaussian_bump", "compact_bump")

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunctionSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in cls.KINDS:
            raise ConfigError(f"unknown test function kind {kind!r}; expected one of {cls.KINDS}")
        name = d.pop("name", None) or kind + "_" + "_".join(f"{k}{v}" for k, v in sorted(d.items()))
        return cls(kind, d, name)

    def build(self) -> GridFunction:
        p = self.params
        try:
            if self.kind == "ramp":
                return ramp_G(p["l"])
            if self.kind == "smooth_ramp":
                return smooth_ramp_G(p["l"])
            if self.kind == "gaussian_bump":
                return gaussian_bump(p.get("center", 0.0), p["width"], p.get("mass", 1.0))
            return compact_bump(p.get("center", 0.0), p["radius"], p.get("mass", 1.0))
        except KeyError as exc:
            raise ConfigError(f"test function {self.name} is missing parameter {exc}") from None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, **self.params}


@dataclass(frozen=True)
class ExperimentConfig:
    process: ProcessParams
    replicas: int
    master_seed: int
    sample_times: tuple[float, ...]
    observables: dict = field(default_factory=lambda: {"current": True, "tagged": False, "field": False})
    field_test_functions: tuple[TestFunctionSpec, ...] = ()
    an_exponent: float = DEFAULT_AN_EXPONENT
    ring_doubling_check: bool = False
    output_path: str = "wasep_out"

    def __post_init__(self):
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigError("replicas must be a positive integer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        t = self.sample_times
        if not t or any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("sample_times must be non-empty and strictly increasing")
        if t[0] <= 0 or t[-1] > self.process.horizon:
            raise ConfigError("sample_times must lie in (0, horizon]")
        if not 0.5 < self.an_exponent < 1.0:
            raise ConfigError("a_n exponent must lie in (0.5, 1)")
        unknown = set(self.observables) - set(OBSERVABLES)
        if unknown:
            raise ConfigError(f"unknown observables {sorted(unknown)}")
        if self.observables.get("field") and not self.field_test_functions:
            raise ConfigError("field observable requested without test functions")

    @property
    def tagged(self) -> bool:
        return bool(self.observables.get("tagged"))

    @property
    def a_n(self) -> float:
        return float(self.process.n) ** self.an_exponent

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        try:
            proc = dict(d["process"])
            params = ProcessParams(
                n=int(proc["n"]),
                alpha=float(proc["alpha"]),
                beta=float(proc["beta"]),
                rho=float(proc["rho"]),
                horizon=float(proc.get("horizon", 1.0)),
                ring_size=proc.get("ring_size"),
            )
            obs = {k: False for k in OBSERVABLES}
            obs.update(d.get("observables", {"current": True}))
            return cls(
                process=params,
                replicas=int(d["replicas"]),
                master_seed=int(d.get("master_seed", 0)),
                sample_times=tuple(float(x) for x in d["sample_times"]),
                observables=obs,
                field_test_functions=tuple(
                    TestFunctionSpec.from_dict(f) for f in d.get("field_test_functions", [])
                ),
                an_exponent=float(d.get("a_n_rule", {}).get("exponent", DEFAULT_AN_EXPONENT)),
                ring_doubling_check=bool(d.get("ring_doubling_check", False)),
                output_path=str(d.get("output_path", "wasep_out")),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        proc = asdict(self.process)
        return {
            "process": proc,
            "replicas": self.replicas,
            "master_seed": int(self.master_seed),
            "sample_times": list(self.sample_times),
            "observables": dict(self.observables),
            "field_test_functions": [f.to_dict() for f in self.field_test_functions],
            "a_n_rule": {"exponent": self.an_exponent},
            "ring_doubling_check": self.ring_doubling_check,
            "output_path": self.output_path,
        }
