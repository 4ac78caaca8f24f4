"""Command line: ``wasep simulate | theory | verify``.

Exit codes: 0 success / all checks pass, 1 verification failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, WasepError
from ..gridfunc import GridPath
from ..rates import rate_finite_dim, rate_path_sub, rate_path_super, rate_tagged
from ..theory import (
    Regime,
    VarianceSpec,
    covariance_matrix,
    f_drift,
    fbm_cov,
    kernel_K,
    kernel_cov_integral,
    variance_a,
)
from .config import ExperimentConfig
from .ensemble import default_workers, run_ensemble
from .io import _jsonable, write_series, write_summary
from .verify import SUITES, verify_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _emit(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2))


def _spec_from_args(args) -> VarianceSpec:
    p = {"alpha": args.alpha, "beta": args.beta, "rho": args.rho}
    if args.params:
        text = args.params
        path = Path(text)
        if path.exists():
            text = path.read_text()
        try:
            p.update(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--params is neither a file nor JSON: {exc}") from None
    return VarianceSpec.from_beta(float(p["alpha"]), float(p["beta"]), float(p["rho"]))


# -- subcommands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    if args.replicas is not None:
        cfg = dataclasses.replace(cfg, replicas=args.replicas)
    out = Path(args.out or cfg.output_path)
    result = run_ensemble(cfg, workers=args.workers)
    files = write_series(out, result.series, cfg.observables)
    summary = {
        "config": cfg.to_dict(),
        "ring_size": cfg.process.ring_size,
        "a_n": cfg.a_n,
        "breaches": result.breaches,
        "estimates": [e.to_dict() for e in result.estimates],
        "files": {k: str(v) for k, v in files.items()},
    }
    if result.ring_doubling is not None:
        summary["ring_doubling"] = dataclasses.asdict(result.ring_doubling)
    write_summary(out / "summary.json", summary)
    _emit({k: summary[k] for k in ("ring_size", "breaches", "estimates")})
    return EXIT_OK


def cmd_theory(args) -> int:
    what = args.what
    if what == "f":
        _emit({"t": args.t, "m": args.m, "f": f_drift(args.t, args.m)})
        return EXIT_OK
    if what == "kernel":
        res = {"t": args.t, "s": args.s}
        if 0 < args.s < args.t:
            res["K"] = kernel_K(args.t, args.s)
        if 0 < args.s <= args.t:
            res["int_K_K"] = kernel_cov_integral(args.t, args.s)
        res["fbm_cov"] = fbm_cov(args.t, args.s)
        _emit(res)
        return EXIT_OK
    spec = _spec_from_args(args)
    if what == "a":
        _emit({"t": args.t, "s": args.s, "regime": spec.regime.value,
               "a": variance_a(args.t, args.s, spec)})
        return EXIT_OK
    # rate
    if not args.times or len(args.times) != len(args.values):
        raise ConfigError("theory rate needs --times and --values of equal length")
    times = np.asarray(args.times, dtype=float)
    values = np.asarray(args.values, dtype=float)
    res = {"regime": spec.regime.value, "form": args.form}
    if args.form == "grid":
        if spec.regime is Regime.SUB and spec.drift == 0.0:
            raise ConfigError("degenerate sub-critical variance: beta < 1 with rho = 1/2")
        rate = rate_finite_dim(values, covariance_matrix(times, spec))
    elif args.form == "path":
        if spec.regime is not Regime.SUB:
            raise ConfigError("--form path evaluates the beta < 1 rate; use --form derivative for beta > 1")
        rate = rate_path_sub(GridPath(np.r_[0.0, times], np.r_[0.0, values]), spec)
    else:
        if spec.regime is not Regime.SUPER:
            raise ConfigError("--form derivative evaluates the beta > 1 rate")
        rate, path = rate_path_super(GridPath(times, values), spec)
        res["path"] = {"times": path.times.tolist(), "values": path.values.tolist()}
    res["rate"] = rate
    if args.tagged:
        res["tagged_rate"] = rate_tagged(rate, spec.rho)
    _emit(res)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    reports = [verify_suite(n, quick=args.quick) for n in names]
    payload = [r.to_dict() for r in reports]
    if args.out:
        write_summary(args.out, {"suites": payload})
    for r in reports:
        for c in r.checks:
            mark = "PASS" if c.passed else "FAIL"
            print(f"[{mark}] {r.name}: {c.name}: value={c.value:.6g} target={c.target:.6g} "
                  f"tol={c.tolerance:.3g} {c.detail}".rstrip())
    ok = all(r.passed for r in reports)
    print(f"{'PASS' if ok else 'FAIL'}: {', '.join(names)}")
    return EXIT_OK if ok else EXIT_FAIL


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wasep", description="Exact WASEP simulation, Gaussian-limit theory and verification suites."
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an ensemble from a JSON config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, help="override the master seed")
    sim.add_argument("--out", help="output directory (default: config output_path)")
    sim.add_argument("--replicas", type=int, help="override the replica count")
    sim.add_argument("--workers", type=int, default=None,
                     help=f"worker processes (default: $WASEP_WORKERS or {default_workers()})")
    sim.set_defaults(func=cmd_simulate)

    th = sub.add_parser("theory", help="evaluate limiting covariances and rates")
    th.add_argument("what", choices=["a", "f", "kernel", "rate"])
    th.add_argument("--t", type=float, default=1.0)
    th.add_argument("--s", type=float, default=1.0)
    th.add_argument("--m", type=float, default=0.0, help="drift for f")
    th.add_argument("--alpha", type=float, default=1.0)
    th.add_argument("--beta", type=float, default=2.0)
    th.add_argument("--rho", type=float, default=0.3)
    th.add_argument("--params", help="JSON object or file with alpha, beta, rho")
    th.add_argument("--times", type=float, nargs="*")
    th.add_argument("--values", type=float, nargs="*")
    th.add_argument("--form", choices=["grid", "path", "derivative"], default="grid",
                    help="grid: r'A^-1 r/2; path: beta<1 path rate; derivative: beta>1 rate of h'")
    th.add_argument("--tagged", action="store_true", help="also report the tagged-particle rate")
    th.set_defaults(func=cmd_theory)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", choices=list(SUITES) + ["all"])
    ver.add_argument("--quick", action="store_true", help="tenfold fewer replicas")
    ver.add_argument("--out", help="write the JSON report here")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WasepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
