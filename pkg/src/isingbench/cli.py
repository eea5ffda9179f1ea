"""Command-line entry point: ``isingbench {run,budget,fit,report,kappa-sweep}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from .harness.budget import estimate_budget
from .harness.config import ConfigError, load_config, parse_sides


def _experiment_overrides(args) -> dict:
    return {
        "sides": args.sides,
        "rng": args.rng,
        "kappa": args.kappa,
        "entropy": args.entropy,
        "seed": args.seed,
        "iterations": args.iterations,
        "out": args.out,
        "workers": args.workers,
        "stream_mode": args.stream_mode,
        "seed_source": args.seed_source,
    }


def _add_experiment_flags(p):
    p.add_argument("--config", help="key = value experiment file")
    p.add_argument("--sides", help="comma-separated lattice sides, e.g. 4,8,16")
    p.add_argument("--rng", choices=["prng0", "prng1", "prng2", "prng3", "lcg", "entropy-file"])
    p.add_argument("--kappa", help="reseed every kappa*(m-1) draws, e.g. 1/2")
    p.add_argument("--entropy", help="raw little-endian entropy file or device")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (unsigned 64-bit)")
    p.add_argument("--iterations", type=int, help="iterations per side")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", help="worker processes, or 'auto'")
    p.add_argument("--stream-mode", choices=["per-site", "shared"])
    p.add_argument("--seed-source", choices=["splitmix64", "entropy-file"])


def cmd_run(args) -> int:
    from .harness.experiment import run_experiment

    config = load_config(args.config, _experiment_overrides(args))
    result = run_experiment(config)
    z = result.zfit
    summary = {"status": "ok", "out": config.output_dir, "z": z.z if z else None, "z_stderr": z.z_stderr if z else None}
    print(json.dumps(summary))
    return 0


def cmd_kappa_sweep(args) -> int:
    from .harness.experiment import run_kappa_sweep
    from .rng import parse_kappa

    config = load_config(args.config, _experiment_overrides(args))
    kappas = [parse_kappa(k) for k in args.kappas.split(",")]
    sweep = run_kappa_sweep(config, kappas)
    print(json.dumps({"status": "ok", "intercept_kappa0": sweep.intercept, "plateaus": {str(k): p.value for k, p in sweep.plateaus.items()}}))
    return 0


def cmd_budget(args) -> int:
    sides = parse_sides(args.sides)
    rows = [estimate_budget(L, args.z, args.iterations, args.bits).as_row() for L in sides]
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return 0


def _load_fit_input(path):
    """A MagSeries CSV, or a correlation CSV whose column header is ``chi``."""
    from .dynamics import CorrelationEstimate, MagSeries

    with open(path) as fh:
        header = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")][:1]
    if header and header[0].strip() == "chi":
        meta, vals = {}, []
        with open(path) as fh:
            for ln in fh:
                if ln.startswith("#"):
                    k, _, v = ln[1:].partition("=")
                    meta[k.strip()] = v.strip()
                elif ln.strip() and ln.strip() != "chi":
                    vals.append(float(ln))
        return int(meta.get("side", 0)), CorrelationEstimate(vals, len(vals) - 1)
    series = MagSeries.from_csv(path)
    return series.side, series


def cmd_fit(args) -> int:
    from .dynamics import MagSeries, autocorrelation
    from .fitting import fit_exponential, fit_power_law

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["file", "side", "tau", "amplitude", "t_lo", "t_hi", "residual"])
    by_side = {}
    for path in args.files:
        side, data = _load_fit_input(path)
        guess = args.tau_guess or float(side) ** 2
        if isinstance(data, MagSeries):
            t_max = min(int(args.t_max_factor * side * side), len(data) - 1)
            data = autocorrelation(data, t_max)
        fit = fit_exponential(data, guess, side)
        by_side.setdefault(side, []).append(fit.tau)
        w.writerow([path, side, repr(fit.tau), repr(fit.amplitude), fit.window[0], fit.window[1], repr(fit.residual)])
    if len(by_side) >= 3:
        z = fit_power_law([(L, sum(t) / len(t)) for L, t in sorted(by_side.items())])
        print(f"# z={z.z!r} z_stderr={z.z_stderr!r} log_tau0={z.log_tau0!r}")
    return 0


def cmd_report(args) -> int:
    from .harness.report import regenerate_report

    result = regenerate_report(args.out)
    z = result.zfit
    print(json.dumps({"status": "ok", "out": args.out, "z": z.z if z else None}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isingbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    _add_experiment_flags(run)
    run.set_defaults(func=cmd_run)

    ks = sub.add_parser("kappa-sweep", help="run one experiment per reseed period and extrapolate to kappa=0")
    _add_experiment_flags(ks)
    ks.add_argument("--kappas", default="1/4,1/2,1,2")
    ks.set_defaults(func=cmd_kappa_sweep)

    b = sub.add_parser("budget", help="print randomness consumption estimates")
    b.add_argument("--sides", default="4,8,16,32,64")
    b.add_argument("--z", type=float, default=2.0, help="planning exponent (2.17 reproduces the reference consumption table)")
    b.add_argument("--iterations", type=int, default=100)
    b.add_argument("--bits", type=int, default=32, help="bits per random number")
    b.set_defaults(func=cmd_budget)

    f = sub.add_parser("fit", help="re-fit persisted magnetization series or correlation data")
    f.add_argument("files", nargs="+")
    f.add_argument("--tau-guess", type=float)
    f.add_argument("--t-max-factor", type=float, default=3.0)
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="regenerate reports from runs.csv")
    r.add_argument("--out", required=True, help="directory holding runs.csv")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print("error: " + json.dumps({"status": "error", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
