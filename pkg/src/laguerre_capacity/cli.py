"""Command-line entry point.

Subcommands: ``pmf``, ``bounds``, ``cdma``, ``sweep`` and ``verify``. Every
subcommand accepts ``--config FILE`` (JSON of flag defaults, overridden by
explicit flags) and ``--save-config FILE``. Exit status is 2 for argument or
domain errors, 1 when a verification check fails and 0 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .bounds import PowerConstraints, lower_bound, upper_bound
from .cdma import CdmaConfig, alpha_star, cdma_lower_bound, optimal_users, sum_capacity
from .channel import ChannelParams, pmf_row
from .verify import SUITES, run_suite

SWEEP_HEADER = ["variable", "value", "lb_nats", "ub_nats", "regime", "mu", "asymptotic"]
_NOT_SAVED = {"command", "config", "save_config"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    return str(v)


def _scale(units: str) -> float:
    return 1.0 if units == "nats" else 1.0 / math.log(2)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--save-config", help="write the effective flags as JSON")
    p.add_argument("--units", choices=["nats", "bits"], default="nats")
    p.add_argument("--out", help="output file (default stdout)")


def _power(p: argparse.ArgumentParser):
    p.add_argument("--peak", "-A", type=float, help="peak intensity constraint A")
    p.add_argument("--avg", "-E", type=float, help="average intensity constraint E")


def _cdma_args(p: argparse.ArgumentParser):
    p.add_argument("--M", type=int, help="number of users (>= 2)")
    p.add_argument("--N0", type=int, help="code length")
    p.add_argument("--noise-tracks-alpha", action="store_true",
                   help="interference follows alpha*A instead of E")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laguerre-capacity",
        description="Capacity bounds for the Laguerre photon-count channel.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pmf", help="output pmf for one input intensity")
    _common(p)
    p.add_argument("--x", type=float, required=True, help="input intensity")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="noise mean")
    p.add_argument("--tail", type=float, default=1e-9, help="truncation tail mass")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("bounds", help="lower/upper capacity bounds")
    _common(p)
    p.add_argument("--mode", choices=["vlc", "cdma"], default="vlc")
    _power(p)
    p.add_argument("--lambda", dest="lam", type=float, help="noise mean (vlc mode)")
    _cdma_args(p)
    p.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("cdma", help="per-user bound, alpha*, sum capacity, optimal M")
    _common(p)
    _power(p)
    _cdma_args(p)
    p.add_argument("--M-max", type=int, help="search 2..M_max for the best user count")
    p.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("sweep", help="bound curve over one variable as CSV")
    _common(p)
    p.add_argument("--mode", choices=["vlc", "cdma"], default="vlc")
    p.add_argument("--variable", choices=["A", "E", "M", "lambda"], required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--scale", choices=["linear", "log"], default="log")
    _power(p)
    p.add_argument("--lambda", dest="lam", type=float, help="noise mean (vlc mode)")
    _cdma_args(p)

    p = sub.add_parser("verify", help="run numerical oracle suites")
    _common(p)
    p.add_argument("--suite", choices=["all", *SUITES], default="all")
    p.add_argument("--seed", type=int, required=True)
    return parser


def _subparser(parser, command):
    return parser._subparsers._group_actions[0].choices[command]


def parse_args(argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` become defaults of the subcommand."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config and command:
        try:
            with open(known.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(defaults, dict):
            parser.error("config must be a JSON object")
        if defaults.pop("command", command) != command:
            parser.error("config was saved for a different subcommand")
        sub = _subparser(parser, command)
        unknown = set(defaults) - {a.dest for a in sub._actions}
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        # Required flags may be supplied by the config file.
        for action in sub._actions:
            if action.dest in defaults:
                action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- subcommands --------------------------------------------------------------


def _vlc_bounds(peak, avg, lam):
    if lam is None:
        raise ValueError("--lambda is required in vlc mode")
    cons = PowerConstraints(peak=peak, average=avg)
    return lower_bound(cons, ChannelParams(lam)), upper_bound(cons)


def _cdma_cfg(args, M=None):
    M = args.M if M is None else M
    if M is None or args.N0 is None:
        raise ValueError("--M and --N0 are required in cdma mode")
    if args.peak is None and args.avg is None:
        raise ValueError("at least one of --peak and --avg must be given")
    eta = args.avg if args.avg is not None else args.peak / 3
    return CdmaConfig(M, args.N0, eta=eta)


def cmd_pmf(args, out):
    row = pmf_row(args.x, ChannelParams(args.lam), args.tail)
    if args.format == "json":
        json.dump({"x": row.x, "lambda": args.lam, "y_max": row.y_max,
                   "tail_mass": row.tail_mass, "probs": row.probs.tolist()}, out)
        out.write("\n")
        return 0
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["y", "prob"])
    for y, p in enumerate(row.probs):
        w.writerow([y, _fmt(p)])
    return 0


def cmd_bounds(args, out):
    k = _scale(args.units)
    if args.mode == "vlc":
        lb, ub = _vlc_bounds(args.peak, args.avg, args.lam)
        res = {"mode": "vlc", "regime": lb.regime.value, "mu": lb.mu,
               "lower": k * lb.value, "upper": k * ub.value,
               "upper_asymptotic": ub.asymptotic, "units": args.units}
    else:
        cfg = _cdma_cfg(args)
        lb = cdma_lower_bound(args.peak, args.avg, cfg, args.noise_tracks_alpha)
        res = {"mode": "cdma", "regime": lb.regime.value, "mu": lb.mu,
               "lower": k * lb.value, "upper": None, "upper_asymptotic": None,
               "units": args.units}
    _emit(res, args.format, out)
    return 0


def cmd_cdma(args, out):
    k = _scale(args.units)
    cfg = _cdma_cfg(args)
    lb = cdma_lower_bound(args.peak, args.avg, cfg, args.noise_tracks_alpha)
    res = {"M": cfg.M, "N0": cfg.N0, "beta": cfg.beta, "regime": lb.regime.value,
           "per_user": k * lb.value, "mu": lb.mu}
    if args.peak is not None:
        E = args.avg if args.avg is not None else args.peak / 3
        res["alpha_star"] = alpha_star(args.peak, E, cfg, args.noise_tracks_alpha)
    res["sum"] = k * sum_capacity(args.peak, args.avg, cfg.M, cfg.N0, args.noise_tracks_alpha).value
    if args.M_max is not None:
        m = optimal_users(args.peak, args.avg, cfg.N0, args.M_max, args.noise_tracks_alpha)
        res["optimal_M"] = m
        res["optimal_sum"] = k * sum_capacity(args.peak, args.avg, m, cfg.N0,
                                              args.noise_tracks_alpha).value
    res["units"] = args.units
    _emit(res, args.format, out)
    return 0


def _emit(res: dict, fmt: str, out):
    if fmt == "json":
        json.dump(res, out, sort_keys=True)
        out.write("\n")
        return
    for key, v in res.items():
        out.write(f"{key} {_fmt(v)}\n")


def sweep_values(start, stop, points, scale, integer=False):
    if not start < stop:
        raise ValueError("sweep needs start < stop")
    if points < 2:
        raise ValueError("sweep needs at least 2 points")
    if scale == "log":
        if start <= 0:
            raise ValueError("log scale needs start > 0")
        vals = np.geomspace(start, stop, points)
    else:
        vals = np.linspace(start, stop, points)
    if integer:
        vals = np.unique(np.rint(vals).astype(int))
    return vals


def sweep_rows(args):
    """Rows of the sweep CSV as lists of strings, sorted by the swept value."""
    k = _scale(args.units)
    var = args.variable
    rows = []
    if args.mode == "vlc":
        if var == "M":
            raise ValueError("variable M needs --mode cdma")
        for v in sweep_values(args.start, args.stop, args.points, args.scale):
            peak, avg, lam = args.peak, args.avg, args.lam
            if var == "A":
                peak = v
            elif var == "E":
                avg = v
            else:
                lam = v
            lb, ub = _vlc_bounds(peak, avg, lam)
            rows.append([var, _fmt(float(v)), _fmt(k * lb.value), _fmt(k * ub.value),
                         lb.regime.value, _fmt(lb.mu), _fmt(ub.asymptotic)])
        return rows
    if var == "lambda":
        raise ValueError("cdma noise is set by M, N0 and E; lambda cannot be swept")
    integer = var == "M"
    for v in sweep_values(args.start, args.stop, args.points, args.scale, integer):
        ns = argparse.Namespace(**vars(args))
        if var == "A":
            ns.peak = float(v)
        elif var == "E":
            ns.avg = float(v)
        cfg = _cdma_cfg(ns, M=int(v) if integer else None)
        lb = cdma_lower_bound(ns.peak, ns.avg, cfg, args.noise_tracks_alpha)
        row = [var, _fmt(int(v) if integer else float(v)), _fmt(k * lb.value), "",
               lb.regime.value, _fmt(lb.mu), ""]
        if integer:
            row += [_fmt(k * lb.value), _fmt(k * cfg.M * lb.value)]
        rows.append(row)
    return rows


def cmd_sweep(args, out):
    rows = sweep_rows(args)
    header = SWEEP_HEADER + (["per_user", "sum"] if args.mode == "cdma" and args.variable == "M" else [])
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return 0


def cmd_verify(args, out):
    results = run_suite(args.suite, args.seed)
    width = max(len(r.name) for r in results)
    out.write(f"{'check':<{width}}  {'value':>12}  {'tolerance':>10}  status\n")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        out.write(f"{r.name:<{width}}  {r.value:>12.4e}  {r.tolerance:>10.2e}  {status}"
                  f"{'  ' + r.detail if r.detail else ''}\n")
    failed = sum(not r.passed for r in results)
    out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return 1 if failed else 0


COMMANDS = {"pmf": cmd_pmf, "bounds": cmd_bounds, "cdma": cmd_cdma,
            "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.save_config:
        cfg = {k: v for k, v in vars(args).items() if k not in _NOT_SAVED}
        cfg["command"] = args.command
        with open(args.save_config, "w") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
    buf = io.StringIO()
    try:
        code = COMMANDS[args.command](args, buf)
    except (ValueError, ArithmeticError) as exc:
        sub = _subparser(parser, args.command)
        sub.print_usage(sys.stderr)
        print(f"{sub.prog}: error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
