"""CSV/JSON persistence.

One CSV per observable (``current.csv``, ``tagged.csv``, ``field_<name>.csv``)
with header ``replica,seed,time,value``; floats are written with 17
significant digits so files round-trip exactly.  ``summary.json`` holds the
config echo, breach count, estimates and any suite verdicts.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..process import ObservableSeries

HEADER = ["replica", "seed", "time", "value"]
BREACH_FILE = "breaches.csv"


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def _observable_files(series: list[ObservableSeries], observables: dict) -> dict[str, str]:
    # the current is always recorded; it also anchors the replica list on reading
    files = {"current": "current.csv"}
    if observables.get("tagged") and series and series[0].centered_tagged is not None:
        files["tagged"] = "tagged.csv"
    if series:
        for name in series[0].field_values:
            files[name] = f"field_{name}.csv"
    return files


def _column(s: ObservableSeries, key: str) -> np.ndarray:
    if key == "current":
        return s.centered_current
    if key == "tagged":
        return s.centered_tagged
    return s.field_values[key]


def write_series(directory: str | Path, series: list[ObservableSeries], observables: dict) -> dict[str, Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for key, fname in _observable_files(series, observables).items():
        path = out / fname
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HEADER)
            for s in series:
                for t, v in zip(s.sample_times, _column(s, key)):
                    w.writerow([s.replica_id, s.seed, _fmt(t), _fmt(v)])
        written[key] = path
    with (out / BREACH_FILE).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "seed", "breached"])
        for s in series:
            w.writerow([s.replica_id, s.seed, int(s.breached)])
    return written


def _read_csv(path: Path) -> dict[int, tuple[int, list[float], list[float]]]:
    rows: dict[int, tuple[int, list[float], list[float]]] = {}
    with path.open(newline="") as fh:
        r = csv.reader(fh)
        if next(r) != HEADER:
            raise ValueError(f"{path} does not have the expected header")
        for rep, seed, t, v in r:
            entry = rows.setdefault(int(rep), (int(seed), [], []))
            entry[1].append(float(t))
            entry[2].append(float(v))
    return rows


def read_series(directory: str | Path) -> list[ObservableSeries]:
    """Rebuild the per-replica series written by ``write_series``."""
    d = Path(directory)
    current = _read_csv(d / "current.csv")
    tagged = _read_csv(d / "tagged.csv") if (d / "tagged.csv").exists() else None
    fields = {p.stem[len("field_"):]: _read_csv(p) for p in sorted(d.glob("field_*.csv"))}
    breached = {}
    if (d / BREACH_FILE).exists():
        with (d / BREACH_FILE).open(newline="") as fh:
            r = csv.reader(fh)
            next(r)
            breached = {int(rep): bool(int(b)) for rep, _, b in r}
    out = []
    for rep in sorted(current):
        seed, times, vals = current[rep]
        out.append(
            ObservableSeries(
                np.array(times),
                np.array(vals),
                np.array(tagged[rep][2]) if tagged is not None else None,
                {name: np.array(rows[rep][2]) for name, rows in fields.items()},
                rep,
                seed,
                breached.get(rep, False),
            )
        )
    return out


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def write_summary(path: str | Path, summary: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    return path
