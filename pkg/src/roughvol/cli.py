"""Command line interface: ``roughvol simulate|estimate|signature|montecarlo|tune|ingest``.

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .estimate import WeightConfig, combined_from_stats, daily_stats, debias_ladder, no_lag0_estimate
from .exceptions import ConvergenceError, DegenerateError, InputError, RoughVolError
from .ingest import DEFAULT_SESSION, calendar_sample, ingest_csv, parse_session
from .montecarlo import expand_grid, monte_carlo
from .simulate import SimConfig, read_path_csv, simulate_mixed, write_path_csv, write_sidecar
from .stats import increment_variance, rv_subsampled, signature_from_values, variance_slope
from .tune import tuned_weight_set

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("roughvol")


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


class _Output:
    """Writes to ``--out`` or stdout."""

    def __init__(self, target: str | None):
        self.target = target

    def __enter__(self):
        self.fh = open(self.target, "w", newline="") if self.target else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.target:
            self.fh.close()
        return False


def _weights(args, cfg: dict) -> WeightConfig:
    if cfg:
        return WeightConfig.from_dict(cfg)
    if getattr(args, "tuned", False):
        ws = tuned_weight_set(args.H0, args.R)
        return WeightConfig.from_weight_set(ws)
    return WeightConfig.default(args.H0, args.R)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = _load_json(args.config)
    for k in ("H", "sigma", "rho", "n", "days", "noise_kind"):
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    if args.seed is not None:
        cfg["seed"] = args.seed
    sc = SimConfig.from_dict(cfg)
    path = simulate_mixed(sc)
    with _Output(args.out) as fh:
        write_path_csv(path, fh)
    if args.out:
        with open(args.out + ".json", "w") as fh:
            write_sidecar(sc, fh)
    return EXIT_OK


def _read_path(p: str):
    try:
        with open(p) as fh:
            return read_path_csv(fh)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {p}") from exc


def cmd_estimate(args) -> int:
    wc = _weights(args, _load_json(args.config))
    path = _read_path(args.path)
    total, last = daily_stats(path, wc.R, args.n_per_day)
    if args.variant == "no_lag0":
        res = no_lag0_estimate(total, wc, vs_last=last)
    elif args.variant == "lag0":
        res = debias_ladder(total, wc, vs_last=last)
    else:
        res = combined_from_stats(total, wc, vs_last=last)
    with _Output(args.out) as fh:
        json.dump(res.to_dict(), fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(res.CSV_FIELDS)
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in res.csv_row()])
    return EXIT_OK


def cmd_signature(args) -> int:
    path = _read_path(args.path)
    i_vals = np.arange(1, args.imax + 1)
    rv = [rv_subsampled(path, int(i)) for i in i_vals]
    var = [increment_variance(path, int(i)) for i in i_vals]
    with _Output(args.out) as fh:
        fh.write("i,rv,var\n")
        for i, a, b in zip(i_vals, rv, var):
            fh.write(f"{int(i)},{float(a)!r},{float(b)!r}\n")
    sig = signature_from_values(i_vals, rv)
    vp = variance_slope(path, args.imax)
    summary = {"signature_slope": sig.slope, "h_signature": sig.h, "variance_slope": vp.slope,
               "h_variance": vp.h}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _load_json(args.config)
    base = cfg.get("base", {})
    grid = cfg.get("grid", {})
    variants = cfg.get("variants", ["no_lag0", "lag0_n3"])
    reps = int(args.reps if args.reps is not None else cfg.get("reps", 500))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    wcfg = cfg.get("weights")
    wc = WeightConfig.from_dict(wcfg) if wcfg else WeightConfig.default(args.H0, args.R)
    report = monte_carlo(expand_grid(base, grid), variants, reps=reps, master_seed=seed,
                         threads=args.threads, wc=wc)
    with _Output(args.out) as fh:
        fh.write("\n".join(report.csv_lines()) + "\n")
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _load_json(args.config)
    H0 = float(cfg.get("H0", args.H0))
    R = int(cfg.get("R", args.R))
    ws = tuned_weight_set(H0, R, m=int(cfg.get("m", 50)), use_cache=not args.no_cache,
                          max_iter=cfg.get("max_iter"))
    with _Output(args.out) as fh:
        json.dump(ws.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _load_json(args.config)
    session = parse_session(args.session) if args.session else tuple(cfg.get("session", DEFAULT_SESSION))
    step = float(args.step if args.step is not None else cfg.get("step_seconds", 5.0))
    series = ingest_csv(args.ticks, session=session, tz=args.tz or cfg.get("tz", "UTC"), by_day=True)
    out = Path(args.out) if args.out else None
    if out is None and len(series) > 1:
        raise InputError("several dates in the input: give --out DIR")
    for ts in series:
        path = calendar_sample(ts, step)
        log.info("%s: %d ticks, %d dropped, %d duplicates, %d grid points",
                 ts.date, len(ts), ts.n_dropped, ts.n_duplicates, len(path))
        if out is None:
            write_path_csv(path, sys.stdout)
            continue
        target = out / f"{ts.date}.csv" if len(series) > 1 or out.is_dir() else out
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w") as fh:
            write_path_csv(path, fh)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON configuration file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="roughvol", parents=[common],
                                description="Rough microstructure noise: simulation and estimation.")
    sub = p.add_subparsers(dest="command", required=True)

    weights = argparse.ArgumentParser(add_help=False)
    weights.add_argument("--H0", type=float, default=0.35, help="design value for the weights")
    weights.add_argument("--R", type=int, default=60, help="largest lag")

    s = sub.add_parser("simulate", parents=[common], help="simulate a mixed fBM path")
    s.add_argument("--H", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--n", type=int, help="observations per day")
    s.add_argument("--days", type=int)
    s.add_argument("--noise-kind", dest="noise_kind", choices=("fbm", "white", "none"))
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common, weights], help="estimate H, C and Pi from a path CSV")
    e.add_argument("path")
    e.add_argument("--variant", choices=("combined", "no_lag0", "lag0"), default="combined")
    e.add_argument("--n-per-day", dest="n_per_day", type=int, help="split the path into days of this many increments")
    e.add_argument("--tuned", action="store_true", help="use optimized weights from the weight cache")
    e.add_argument("--csv", help="also write a one-row CSV here")
    e.set_defaults(func=cmd_estimate)

    g = sub.add_parser("signature", parents=[common], help="signature and variance plot data")
    g.add_argument("path")
    g.add_argument("--imax", type=int, default=20)
    g.set_defaults(func=cmd_signature)

    m = sub.add_parser("montecarlo", parents=[common, weights], help="run a simulation study")
    m.add_argument("--reps", type=int)
    m.add_argument("--json", help="also write the full report as JSON")
    m.set_defaults(func=cmd_montecarlo)

    t = sub.add_parser("tune", parents=[common, weights], help="optimize and cache weight vectors")
    t.add_argument("--no-cache", dest="no_cache", action="store_true")
    t.set_defaults(func=cmd_tune)

    i = sub.add_parser("ingest", parents=[common], help="tick CSV to calendar-sampled path CSV")
    i.add_argument("ticks")
    i.add_argument("--step", type=float, help="sampling step in seconds (default 5)")
    i.add_argument("--session", help="HH:MM-HH:MM (default 09:30-16:00)")
    i.add_argument("--tz", help="time zone for epoch timestamps (default UTC)")
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    for k, v in (("seed", None), ("threads", 1), ("config", None), ("out", None), ("verbose", False)):
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DegenerateError, ConvergenceError, ArithmeticError) as exc:
        print(f"roughvol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RoughVolError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"roughvol: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
