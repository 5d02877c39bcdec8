"""
Command-line front end.

    imflux simulate --config run.yaml --out truth.csv [--seed N]
    imflux scenario fig3 --out-dir results/
    imflux scenario --config run.yaml --out-dir results/
    imflux sweep --config run.yaml --axis freq=2,5,10 --out sweep.csv
    imflux sweep --scenario fig3 --axis r_se=1.0,1.05 --out sweep.csv
    imflux list-scenarios
    imflux show-config fig3

Exit status: 0 success, 2 usage or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from imflux.config import ConfigError, RunConfig, load_config
from imflux.harness import SWEEP_AXES, ErrorMetrics, apply_axis, ScenarioResult, canned_scenarios, run_scenario, sweep
from imflux.machine import SimulationError, Trace, simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

TRUTH_COLUMNS = ["t", "usx", "usy", "isx", "isy", "irx", "iry", "omega", "psi_sx", "psi_sy", "psi_rx", "psi_ry"]
TRACE_COLUMNS = TRUTH_COLUMNS + ["est_psi_sx", "est_psi_sy", "est_psi_rx", "est_psi_ry", "err_x", "err_y", "err_mag"]
METRIC_COLUMNS = ["name"] + list(ErrorMetrics.FIELDS)
SWEEP_COLUMNS = ["axis", "value"] + list(ErrorMetrics.FIELDS) + ["error"]


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Round-trip text for a number; NaN (an absent value) becomes an empty field."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _truth_columns(trace: Trace) -> list[np.ndarray]:
    return [
        trace.t,
        trace.u_s.real,
        trace.u_s.imag,
        trace.i_s.real,
        trace.i_s.imag,
        trace.i_r.real,
        trace.i_r.imag,
        trace.omega,
        trace.psi_s.real,
        trace.psi_s.imag,
        trace.psi_r.real,
        trace.psi_r.imag,
    ]


def _write_rows(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) for v in row])


def write_truth_csv(trace: Trace, path: Path) -> None:
    _write_rows(path, TRUTH_COLUMNS, _truth_columns(trace))


def write_trace_csv(result: ScenarioResult, path: Path) -> None:
    n = len(result.truth)
    if result.psi_r_hat is not None:
        rx, ry = result.psi_r_hat.real, result.psi_r_hat.imag
    else:
        rx = ry = np.full(n, np.nan)
    err = result.error
    cols = _truth_columns(result.truth) + [
        result.psi_s_hat.real,
        result.psi_s_hat.imag,
        rx,
        ry,
        err.real,
        err.imag,
        np.abs(err),
    ]
    _write_rows(path, TRACE_COLUMNS, cols)


def write_metrics_csv(name: str, metrics: ErrorMetrics, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        w.writerow([name] + [fmt(v) for v in metrics.as_row().values()])


def parse_axis(spec: str) -> tuple[str, list[float]]:
    """``"freq=5,50"`` -> ``("freq", [5.0, 50.0])``."""
    name, sep, values = spec.partition("=")
    name = name.strip()
    if not sep or not values.strip():
        raise UsageError(f"axis spec {spec!r} must look like <param>=v1,v2,...")
    if name not in SWEEP_AXES:
        raise UsageError(f"unknown sweep parameter {name!r}; expected one of {', '.join(SWEEP_AXES)}")
    try:
        nums = [float(v) for v in values.split(",")]
    except ValueError:
        raise UsageError(f"axis values in {spec!r} must be numbers") from None
    return name, nums


def _resolve(name: Optional[str], config: Optional[str]) -> RunConfig:
    if (name is None) == (config is None):
        raise UsageError("give exactly one of a scenario name or --config")
    if config is not None:
        return load_config(config)
    scenarios = canned_scenarios()
    if name not in scenarios:
        raise UsageError(f"unknown scenario {name!r}; valid names: {', '.join(scenarios)}")
    return RunConfig(scenarios[name])


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    s = cfg.scenario
    trace = simulate(s.machine, s.profile, s.dt, s.t_end, s.method, s.initial_state())
    out = args.out or cfg.out
    if out is None:
        raise UsageError("no output path: pass --out or set 'out' in the config")
    write_truth_csv(trace, Path(out))
    print(f"wrote {len(trace)} rows to {out}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg = _resolve(args.name, args.config)
    seed = cfg.seed if args.seed is None else args.seed
    result = run_scenario(cfg.scenario, seed)
    out_dir = Path(args.out_dir)
    name = cfg.scenario.name
    write_trace_csv(result, out_dir / f"{name}_trace.csv")
    write_metrics_csv(name, result.metrics, out_dir / f"{name}_metrics.csv")
    m = result.metrics
    print(f"{name}: rms={m.rms:.6g} Wb rel_rms={m.rel_rms:.6g} drift={m.drift_slope:.6g} Wb/s diverged={m.diverged}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    axis, values = parse_axis(args.axis)
    cfg = _resolve(args.scenario, args.config)
    seed = cfg.seed if args.seed is None else args.seed
    try:
        apply_axis(cfg.scenario, axis, values[0])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = sweep(cfg.scenario, axis, values, seed, workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            cells = [fmt(v) for v in r.metrics.as_row().values()] if r.metrics else [""] * len(ErrorMetrics.FIELDS)
            w.writerow([r.axis, fmt(r.value)] + cells + [r.error or ""])
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"{axis}={r.value:g}: {r.error}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_list(args) -> int:
    for name, s in canned_scenarios().items():
        print(f"{name:8s} {s.estimator.value}")
    return EXIT_OK


def cmd_show_config(args) -> int:
    print(_resolve(args.name, None).dumps(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imflux", description="Induction machine flux estimator experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write the ground-truth machine trace as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="accepted for symmetry; the truth trace is noise-free")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="run one estimator scenario")
    p.add_argument("name", nargs="?")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sweep", help="vary one parameter and tabulate error metrics")
    p.add_argument("--config")
    p.add_argument("--scenario", help="canned scenario to use as the base instead of --config")
    p.add_argument("--axis", required=True, help="<param>=v1,v2,... with param in " + ", ".join(SWEEP_AXES))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("list-scenarios", help="list canned scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("show-config", help="print a canned scenario as a config file")
    p.add_argument("name")
    p.set_defaults(func=cmd_show_config)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
