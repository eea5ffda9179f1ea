"""Experiment orchestration: seeding, job scheduling, per-run fits, aggregation."""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..dynamics import TrajectoryAborted, TrajectoryPlan, autocorrelation, default_t_max, simulate_batch
from ..fitting import FitError, VarianceSummary, ZFit, fit_exponential, fit_power_law, normalized_variance
from ..rng import (
    EntropyFileStream,
    LcgStream,
    ReseededLcgStream,
    ReseedPolicy,
    SiteStreams,
    SplitMix64Stream,
    draw_seed,
    splitmix64_mix,
)
from .budget import BudgetEstimate, estimate_budget
from .config import ExperimentConfig

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.2
# slack on entropy reserved for seeds, covering redrawn zero/duplicate seeds
SEED_SLACK = 1.25


class ExperimentError(RuntimeError):
    pass


@dataclass
class RunRecord:
    side: int
    iteration: int
    seed: int
    rng_label: str
    tau: float
    amplitude: float
    t_lo: int
    t_hi: int
    residual: float
    draws: int
    status: str = "ok"
    message: str = ""
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class ExperimentResult:
    config: ExperimentConfig | None
    records: list
    summaries: dict
    zfit: ZFit | None
    budgets: dict = field(default_factory=dict)

    def mean_taus(self) -> list:
        return [(L, s.mean_tau) for L, s in sorted(self.summaries.items())]


def derive_seed(master_seed: int, side: int, iteration: int) -> int:
    h = splitmix64_mix(master_seed ^ 0x5EED5EED5EED5EED)
    h = splitmix64_mix(h ^ (side * 0x9E3779B97F4A7C15))
    return splitmix64_mix(h ^ ((iteration + 1) * 0xD1B54A32D192ED03))


def plan_for(config: ExperimentConfig, side: int) -> TrajectoryPlan:
    return TrajectoryPlan(side, config.z_approx, config.run_multiple, config.equil_multiple)


def budget_for(config: ExperimentConfig, side: int, bits_per_number: int = 32) -> BudgetEstimate:
    plan = plan_for(config, side)
    return estimate_budget(
        side,
        z_plan=config.z_approx,
        n_iterations=config.iterations_for(side),
        bits_per_number=bits_per_number,
        equil_sweeps=plan.equil_sweeps,
        run_multiple=config.run_multiple,
    )


def _seed_words(config: ExperimentConfig, side: int) -> int:
    """Entropy words reserved for seeding one trajectory."""
    plan = plan_for(config, side)
    n = side * side
    rng = config.rng
    sites = n if rng.stream_mode == "per-site" else 1
    reseeds = 0
    if rng.kappa is not None:
        interval = ReseedPolicy.for_params(rng.kappa, rng.params).reseed_interval
        per_stream = plan.total_sweeps if rng.stream_mode == "per-site" else plan.draws_per_trajectory
        reseeds = max(per_stream - 1, 0) // interval
    return int(math.ceil(sites * (1 + reseeds) * SEED_SLACK)) + 64


def entropy_words_per_run(config: ExperimentConfig, side: int) -> int:
    rng = config.rng
    if rng.kind == "entropy-file":
        return plan_for(config, side).draws_per_trajectory
    if rng.seed_source == "entropy-file":
        return _seed_words(config, side)
    return 0


def entropy_offsets(config: ExperimentConfig) -> dict:
    """Fixed byte offset of every (side, iteration) inside the entropy file."""
    word_bytes = config.rng.word_width // 8
    if config.rng.seed_source == "entropy-file" and config.rng.kind != "entropy-file":
        word_bytes = 8 if config.rng.params.modulus > 2**32 else word_bytes
    offsets, pos = {}, 0
    for side in config.sides:
        words = entropy_words_per_run(config, side)
        for it in range(config.iterations_for(side)):
            offsets[(side, it)] = pos
            pos += words * word_bytes
    offsets["total_bytes"] = pos
    return offsets


def check_entropy_supply(config: ExperimentConfig):
    rng = config.rng
    if not rng.entropy_path or rng.exhausted_policy == "wrap":
        return
    need = entropy_offsets(config)["total_bytes"]
    path = rng.entropy_path
    if not os.path.exists(path):
        raise ExperimentError(f"entropy file {path} does not exist")
    import stat

    st = os.stat(path)
    if stat.S_ISREG(st.st_mode) and st.st_size < need:
        raise ExperimentError(f"entropy file {path} holds {st.st_size} bytes, experiment needs {need}")


@dataclass(frozen=True)
class Job:
    config: ExperimentConfig
    side: int
    iterations: tuple
    offsets: tuple = ()


def make_jobs(config: ExperimentConfig) -> list:
    offsets = entropy_offsets(config) if config.rng.entropy_path else {}
    jobs = []
    for side in config.sides:
        n = config.iterations_for(side)
        n_batches = math.ceil(n / config.batch_size)
        bounds = np.linspace(0, n, n_batches + 1).round().astype(int)
        for b in range(n_batches):
            its = tuple(range(bounds[b], bounds[b + 1]))
            jobs.append(Job(config, side, its, tuple(offsets.get((side, i), 0) for i in its)))
    return jobs


def _entropy_stream(config, offset):
    r = config.rng
    width = r.word_width
    if r.kind != "entropy-file" and r.params.modulus > 2**width:
        width = 64
    return EntropyFileStream(r.entropy_path, width, offset, r.exhausted_policy)


def build_source(config: ExperimentConfig, side: int, seed: int, offset: int = 0):
    """Random source for one trajectory: a per-site bank or a single stream."""
    r = config.rng
    if r.kind == "entropy-file":
        return _entropy_stream(config, offset)
    seed_source = _entropy_stream(config, offset) if r.seed_source == "entropy-file" else SplitMix64Stream(seed)
    policy = ReseedPolicy.for_params(r.kappa, r.params) if r.kappa is not None else None
    if r.stream_mode == "per-site":
        return SiteStreams.spawn(seed_source, r.params, side * side, policy)
    first = draw_seed(seed_source, r.params)
    if policy is None:
        return LcgStream(r.params, first)
    return ReseededLcgStream(r.params, policy, seed_source, first)


def _series_path(config, side, it):
    d = os.path.join(config.output_dir, "series")
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, f"mag_L{side}_it{it:04d}.csv")


def run_job(job: Job) -> list:
    config, side = job.config, job.side
    plan = plan_for(config, side)
    seeds = [derive_seed(config.master_seed, side, it) for it in job.iterations]
    label = config.rng.label
    t0 = time.perf_counter()
    sources = [build_source(config, side, s, off) for s, off in zip(seeds, job.offsets or [0] * len(seeds))]
    try:
        batch = simulate_batch(plan, sources)
    except TrajectoryAborted as exc:
        return [
            RunRecord(side, it, s, label, math.nan, math.nan, 0, 0, math.nan, 0, "failed", f"aborted at sweep {exc.sweep}: {exc}")
            for it, s in zip(job.iterations, seeds)
        ]
    finally:
        for src in sources:
            for fh in (src, getattr(src, "seed_source", None)):
                if isinstance(fh, EntropyFileStream):
                    fh.close()
    wall = (time.perf_counter() - t0) / len(seeds)
    t_max = default_t_max(plan, config.t_max_factor)
    records = []
    for q, (it, seed) in enumerate(zip(job.iterations, seeds)):
        t1 = time.perf_counter()
        series = batch.series(q, seed)
        if config.save_series:
            series.to_csv(_series_path(config, side, it))
        try:
            fit = fit_exponential(autocorrelation(series, t_max), plan.tau_approx, side)
            rec = RunRecord(side, it, seed, label, fit.tau, fit.amplitude, fit.window[0], fit.window[1], fit.residual, batch.draws[q])
        except (FitError, ValueError) as exc:
            rec = RunRecord(side, it, seed, label, math.nan, math.nan, 0, 0, math.nan, batch.draws[q], "failed", str(exc))
        rec.wall_time = wall + time.perf_counter() - t1
        records.append(rec)
    return records


def aggregate(records: list, config: ExperimentConfig | None = None) -> ExperimentResult:
    by_side: dict = {}
    for r in records:
        by_side.setdefault(r.side, []).append(r)
    summaries = {}
    for side, recs in sorted(by_side.items()):
        good = [r.tau for r in sorted(recs, key=lambda r: r.iteration) if r.ok]
        failed = len(recs) - len(good)
        if failed:
            warnings.warn(f"L={side}: {failed} of {len(recs)} fits failed and are excluded", RuntimeWarning, stacklevel=2)
        if failed > MAX_FAILURE_FRACTION * len(recs):
            raise ExperimentError(f"L={side}: {failed} of {len(recs)} iterations failed (> 20%)")
        summaries[side] = normalized_variance(good, side)
    zfit = None
    if len(summaries) >= 3:
        zfit = fit_power_law([(L, s.mean_tau) for L, s in sorted(summaries.items())])
    budgets = {L: budget_for(config, L) for L in config.sides} if config is not None else {}
    return ExperimentResult(config, records, summaries, zfit, budgets)


def execute(config: ExperimentConfig) -> list:
    """Run all trajectories and return records sorted by (side, iteration)."""
    check_entropy_supply(config)
    jobs = make_jobs(config)
    seeds = [derive_seed(config.master_seed, j.side, it) for j in jobs for it in j.iterations]
    if len(set(seeds)) != len(seeds):
        raise ExperimentError("derived iteration seeds collide; choose another master seed")
    if config.save_series:
        os.makedirs(config.output_dir, exist_ok=True)
    workers = min(config.workers, len(jobs))
    log.info("running %d jobs on %d worker(s)", len(jobs), workers)
    if workers <= 1:
        results = [run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_job, jobs))
    records = [r for batch in results for r in batch]
    return sorted(records, key=lambda r: (r.side, r.iteration))


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    from .report import emit_report, write_runs

    records = execute(config)
    try:
        result = aggregate(records, config)
    except ExperimentError:
        if write:
            write_runs(records, config.output_dir)
        raise
    if write:
        emit_report(result, config.output_dir)
    return result


@dataclass
class KappaSweepResult:
    kappas: list
    results: dict
    plateaus: dict
    intercept: float


def kappa_label(kappa: Fraction) -> str:
    k = Fraction(kappa)
    return f"{k.numerator}" if k.denominator == 1 else f"{k.numerator}_{k.denominator}"


def run_kappa_sweep(config: ExperimentConfig, kappas, write: bool = True, reuse=None) -> KappaSweepResult:
    """Run one experiment per reseeding period and extrapolate the plateau to kappa = 0.

    ``reuse`` may map a kappa to an existing :class:`ExperimentResult`.
    """
    from dataclasses import replace

    from ..fitting import extrapolate_kappa_zero, plateau_value
    from .report import emit_report, write_kappa_sweep

    results, plateaus = {}, {}
    for k in [Fraction(k) for k in kappas]:
        if reuse and k in reuse:
            res = reuse[k]
        else:
            sub = replace(
                config,
                rng=replace(config.rng, kappa=k),
                output_dir=os.path.join(config.output_dir, f"kappa_{kappa_label(k)}"),
            )
            res = run_experiment(sub, write=write)
        results[k] = res
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plateaus[k] = plateau_value([(L, s.normalized) for L, s in res.summaries.items()])
    intercept = extrapolate_kappa_zero([(float(k), p.value) for k, p in plateaus.items()])
    out = KappaSweepResult(list(results), results, plateaus, intercept)
    if write:
        write_kappa_sweep(out, config.output_dir)
    return out
