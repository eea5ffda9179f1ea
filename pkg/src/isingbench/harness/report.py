"""Report files: runs.csv, timings.csv, tau_by_L.csv, zfit.json, report.md."""

from __future__ import annotations

import csv
import json
import math
import os

from ..fitting import relative_error
from .experiment import ExperimentResult, RunRecord, aggregate
from .reference import PUBLISHED_Z, Z_REF, Z_REF_UNCERTAINTY, load_reference_table, mc_mean

RUN_FIELDS = ["side", "iteration", "seed", "rng_label", "tau", "amplitude", "t_lo", "t_hi", "residual", "draws", "status", "message"]


class ReportError(OSError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _prepare(output_dir: str):
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {output_dir}: {exc}") from exc
    if not os.access(output_dir, os.W_OK):
        raise ReportError(f"output directory {output_dir} is not writable")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_runs(records, output_dir: str):
    _prepare(output_dir)
    _write_rows(
        os.path.join(output_dir, "runs.csv"),
        RUN_FIELDS,
        ([getattr(r, f) for f in RUN_FIELDS] for r in records),
    )
    _write_rows(
        os.path.join(output_dir, "timings.csv"),
        ["side", "iteration", "wall_time_s"],
        ((r.side, r.iteration, f"{r.wall_time:.3f}") for r in records),
    )


def read_runs(path) -> list:
    if os.path.isdir(path):
        path = os.path.join(path, "runs.csv")
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                RunRecord(
                    side=int(row["side"]),
                    iteration=int(row["iteration"]),
                    seed=int(row["seed"]),
                    rng_label=row["rng_label"],
                    tau=float(row["tau"]),
                    amplitude=float(row["amplitude"]),
                    t_lo=int(row["t_lo"]),
                    t_hi=int(row["t_hi"]),
                    residual=float(row["residual"]),
                    draws=int(row["draws"]),
                    status=row["status"],
                    message=row["message"],
                )
            )
    return out


def zfit_payload(result: ExperimentResult) -> dict:
    z = result.zfit
    payload = {
        "rng": result.records[0].rng_label if result.records else "",
        "z": None,
        "z_stderr": None,
        "log_tau0": None,
        "z_ref": Z_REF,
        "relative_error": None,
        "points": [{"L": L, "mean_tau": s.mean_tau} for L, s in sorted(result.summaries.items())],
    }
    if z is not None:
        payload.update(z=z.z, z_stderr=z.z_stderr, log_tau0=z.log_tau0, relative_error=relative_error(z.z, Z_REF))
    return payload


def render_markdown(result: ExperimentResult) -> str:
    lines = ["# Dynamic exponent benchmark", ""]
    label = result.records[0].rng_label if result.records else "?"
    lines += [f"Generator: `{label}`", ""]
    if result.config is not None:
        lines += ["## Configuration", "", "```", result.config.to_text().rstrip(), "```", ""]
    lines += ["## Relaxation time by lattice side", "", "| L | N_it | mean tau | tau / L^2 | sigma^2/mu^2 | draws / run |", "|---|---|---|---|---|---|"]
    draws = {}
    for r in result.records:
        if r.ok:
            draws.setdefault(r.side, r.draws)
    for L, s in sorted(result.summaries.items()):
        lines.append(f"| {L} | {s.n_iterations} | {s.mean_tau:.4f} | {s.mean_tau / L**2:.4f} | {s.normalized:.5f} | {draws.get(L, '')} |")
    lines.append("")
    failed = [r for r in result.records if not r.ok]
    if failed:
        lines += [f"{len(failed)} run(s) failed and were excluded.", ""]
    lines += ["## Dynamic exponent", ""]
    if result.zfit is None:
        lines += ["Fewer than three lattice sides; no power-law fit.", ""]
    else:
        z = result.zfit
        eps = relative_error(z.z, Z_REF)
        lines += [
            f"- z = {z.z:.4f} +/- {z.z_stderr:.4f} (OLS of ln tau on ln L with offset)",
            f"- ln(tau0) = {z.log_tau0:.4f}",
            f"- reference z_ref = {Z_REF} +/- {Z_REF_UNCERTAINTY} (stochastic-matrix estimate, Nightingale 2000)",
            f"- relative error eps_r = |z - z_ref| / z_ref = {eps:.4f}",
            "",
        ]
    table = load_reference_table()
    mc2 = mc_mean(2)
    lines += [
        "## Literature values",
        "",
        f"{sum(e.dimension == 2 for e in table)} two-dimensional and {sum(e.dimension == 3 for e in table)} three-dimensional estimates are bundled.",
        f"Mean of the two-dimensional Monte Carlo estimates: {mc2:.4f}.",
        "",
        "| source | z | eps_r |",
        "|---|---|---|",
    ]
    for name, (zv, _) in PUBLISHED_Z.items():
        lines.append(f"| published {name} | {zv} | {relative_error(zv, Z_REF):.4f} |")
    if result.zfit is not None:
        lines.append(f"| this run | {result.zfit.z:.4f} | {relative_error(result.zfit.z, Z_REF):.4f} |")
    lines.append("")
    return "\n".join(lines)


def emit_report(result: ExperimentResult, output_dir: str):
    write_runs(result.records, output_dir)
    rows = []
    for L, s in sorted(result.summaries.items()):
        rows.append((L, s.mean_tau, s.variance_tau, s.normalized, s.n_iterations))
    _write_rows(os.path.join(output_dir, "tau_by_L.csv"), ["L", "mean_tau", "variance_tau", "normalized_variance", "n_iterations"], rows)
    with open(os.path.join(output_dir, "zfit.json"), "w", newline="\n") as fh:
        json.dump(zfit_payload(result), fh, indent=2)
        fh.write("\n")
    with open(os.path.join(output_dir, "report.md"), "w", newline="\n") as fh:
        fh.write(render_markdown(result))
    if result.config is not None:
        with open(os.path.join(output_dir, "config.txt"), "w", newline="\n") as fh:
            fh.write(result.config.to_text())


def regenerate_report(output_dir: str) -> ExperimentResult:
    """Rebuild aggregates and report files from an existing runs.csv."""
    from .config import load_config

    records = read_runs(output_dir)
    cfg_path = os.path.join(output_dir, "config.txt")
    config = load_config(cfg_path, {"out": output_dir}) if os.path.exists(cfg_path) else None
    result = aggregate(records, config)
    emit_report(result, output_dir)
    return result


def write_kappa_sweep(sweep, output_dir: str):
    _prepare(output_dir)
    rows = [(str(k), float(k), p.value, p.is_plateau, p.spread) for k, p in sweep.plateaus.items()]
    _write_rows(os.path.join(output_dir, "kappa_sweep.csv"), ["kappa", "kappa_float", "plateau", "is_plateau", "upper_half_spread"], rows)
    with open(os.path.join(output_dir, "kappa_extrapolation.json"), "w", newline="\n") as fh:
        json.dump(
            {
                "points": [{"kappa": str(k), "plateau": p.value} for k, p in sweep.plateaus.items()],
                "intercept_kappa0": sweep.intercept,
            },
            fh,
            indent=2,
        )
        fh.write("\n")


def is_nan(x) -> bool:
    return isinstance(x, float) and math.isnan(x)
