"""Trajectory protocol: ordered start, equilibration, per-sweep magnetization,
and the time-delayed magnetization correlation."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .ising import LatticeState, color_sites, critical_beta, raw_thresholds
from .rng import EntropyExhausted, RngError, RngStream, SiteStreams

# raw values buffered per chunk on the external-draw path
_EXTERNAL_CHUNK_VALUES = 1 << 22


class TrajectoryAborted(RuntimeError):
    """Random supply ran out mid-trajectory.

    ``sweep`` is the number of completed sweeps (equilibration included) and
    ``partial`` holds whatever magnetizations were recorded.
    """

    def __init__(self, message: str, sweep: int, partial: "MagSeries | None" = None):
        super().__init__(message)
        self.sweep = sweep
        self.partial = partial


class DegenerateSeries(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryPlan:
    side: int
    z_approx: float = 2.0
    run_multiple: int = 1300
    equil_multiple: int = 20

    def __post_init__(self):
        if self.run_multiple < 1 or self.equil_multiple < 0:
            raise ValueError("run_multiple must be >= 1 and equil_multiple >= 0")

    @property
    def tau_approx(self) -> int:
        return int(round(self.side**self.z_approx))

    @property
    def run_sweeps(self) -> int:
        return self.run_multiple * self.tau_approx

    @property
    def equil_sweeps(self) -> int:
        return self.equil_multiple * self.tau_approx

    @property
    def total_sweeps(self) -> int:
        return self.run_sweeps + self.equil_sweeps

    @property
    def draws_per_trajectory(self) -> int:
        return self.total_sweeps * self.side * self.side


@dataclass
class MagSeries:
    values: np.ndarray
    side: int
    rng_label: str = ""
    master_seed: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self):
        return len(self.values)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# side={self.side}\n# rng={self.rng_label}\n")
        buf.write(f"# master_seed={self.master_seed}\n# sweeps={len(self.values)}\n")
        buf.write("magnetization\n")
        np.savetxt(buf, self.values, fmt="%.17g")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "MagSeries":
        meta = {}
        with open(path) as fh:
            lines = fh.read().splitlines()
        body = []
        for ln in lines:
            if ln.startswith("#"):
                key, _, val = ln[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif ln.strip() and ln.strip() != "magnetization":
                body.append(float(ln))
        values = np.array(body)
        if "sweeps" in meta and int(meta["sweeps"]) != len(values):
            raise ValueError(f"{path}: header says {meta['sweeps']} sweeps, found {len(values)}")
        return cls(values, int(meta.get("side", 0)), meta.get("rng", ""), int(meta.get("master_seed", 0)))


@dataclass
class CorrelationEstimate:
    chi: np.ndarray
    t_max: int

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=np.float64)
        if not np.isfinite(self.chi).all():
            raise DegenerateSeries("correlation estimate is not finite")


@dataclass
class BatchRun:
    """Magnetization totals of R trajectories run side by side."""

    side: int
    spin_sums: np.ndarray  # (run_sweeps, R) integer spin totals
    draws: list
    labels: list
    extra: dict = field(default_factory=dict)

    def series(self, q: int, master_seed: int = 0) -> MagSeries:
        return MagSeries(self.spin_sums[:, q] / float(self.side * self.side), self.side, self.labels[q], master_seed)


def _sum_dtype(side: int):
    return np.int16 if side * side <= np.iinfo(np.int16).max else np.int32


def _initial_spins(plan: TrajectoryPlan, R: int, initial: LatticeState | None) -> np.ndarray:
    L = plan.side
    if initial is None:
        return np.ones((L, L, R), dtype=np.float64)
    if initial.side != L:
        raise ValueError("initial lattice side does not match the plan")
    return np.repeat(initial.spins.astype(np.float64)[:, :, None], R, axis=2).copy()


def simulate_batch(
    plan: TrajectoryPlan,
    sources: Sequence,
    beta: float | None = None,
    initial: LatticeState | None = None,
) -> BatchRun:
    """Run one trajectory per source, vectorized across sources.

    Sources are either all :class:`SiteStreams` banks sharing generator
    parameters and reseed schedule, or all single :class:`RngStream` objects
    consumed in site order (shared-stream mode).
    """
    if not sources:
        raise ValueError("no sources")
    beta = critical_beta() if beta is None else beta
    table = LatticeState(plan.side, beta=beta).accept_table
    if all(isinstance(s, SiteStreams) for s in sources):
        return _simulate_site_streams(plan, list(sources), table, initial)
    if all(isinstance(s, RngStream) for s in sources):
        return _simulate_external(plan, list(sources), table, initial)
    raise TypeError("sources must be all SiteStreams or all RngStream")


def _simulate_site_streams(plan, banks: list[SiteStreams], table, initial) -> BatchRun:
    L = plan.side
    R = len(banks)
    params = banks[0].params
    interval = banks[0].policy.reseed_interval if banks[0].policy else None
    for b in banks:
        if len(b) != L * L:
            raise ValueError(f"need {L * L} site streams, got {len(b)}")
        if b.params != params or (b.policy.reseed_interval if b.policy else None) != interval:
            raise ValueError("all banks in a batch must share parameters and reseed interval")
    if not _kernels.lcg_fits_float(params):
        raise RngError(f"{params.label}: modulus too wide for the compiled sweep; use ising.full_sweep")
    d0 = banks[0].lockstep_draws()
    if any(b.lockstep_draws() != d0 for b in banks):
        raise ValueError("banks start at different draw counts")

    black, white = color_sites(L, 0), color_sites(L, 1)
    m, a, c, invm = _kernels.lcg_constants(params)
    t4, t8 = raw_thresholds(table, params.modulus)
    spins = _initial_spins(plan, R, initial)
    totals = spins.sum(axis=(0, 1))
    sums = np.zeros((plan.run_sweeps, R), dtype=_sum_dtype(L))
    empty = np.zeros((0, R), dtype=sums.dtype)

    def load():
        return np.stack([b.states.astype(np.float64).reshape(L, L) for b in banks], axis=2).copy()

    states = load()
    done = 0
    total = plan.total_sweeps
    while done < total:
        d = d0 + done
        if interval and d > 0 and d % interval == 0:
            for q, b in enumerate(banks):
                b.states[:] = states[:, :, q].reshape(-1).astype(np.int64)
                b.reseed_sites(black)
                b.reseed_sites(white)
            states = load()
        chunk = total - done
        if interval:
            chunk = min(chunk, interval - d % interval)
        if done < plan.equil_sweeps:
            chunk = min(chunk, plan.equil_sweeps - done)
            out, off = empty, 0
        else:
            out, off = sums, done - plan.equil_sweeps
        _kernels.sweep_lcg(spins, states, m, a, c, invm, t4, t8, chunk, totals, out, off)
        for b in banks:
            b.draws += chunk
        done += chunk
    for q, b in enumerate(banks):
        b.states[:] = states[:, :, q].reshape(-1).astype(np.int64)
    return BatchRun(L, sums, [b.total_draws for b in banks], [b.label for b in banks], {"spins": spins})


def _simulate_external(plan, streams: list[RngStream], table, initial) -> BatchRun:
    L = plan.side
    N = L * L
    R = len(streams)
    modulus = streams[0].modulus
    if any(s.modulus != modulus for s in streams):
        raise ValueError("all shared streams in a batch must have the same modulus")
    if modulus > _kernels.FLOAT_EXACT:
        raise RngError(f"modulus {modulus} is too wide to drive spin updates")
    t4, t8 = raw_thresholds(table, modulus)
    spins = _initial_spins(plan, R, initial)
    totals = spins.sum(axis=(0, 1))
    sums = np.zeros((plan.run_sweeps, R), dtype=_sum_dtype(L))
    empty = np.zeros((0, R), dtype=sums.dtype)
    start_draws = [s.draws for s in streams]
    per_chunk = max(1, _EXTERNAL_CHUNK_VALUES // (N * R))
    done = 0
    total = plan.total_sweeps
    while done < total:
        chunk = min(per_chunk, total - done)
        if done < plan.equil_sweeps:
            chunk = min(chunk, plan.equil_sweeps - done)
            out, off = empty, 0
        else:
            out, off = sums, done - plan.equil_sweeps
        raws = np.empty((chunk, N, R), dtype=np.float64)
        for q, s in enumerate(streams):
            try:
                raws[:, :, q] = s.next_raw_block(chunk * N).reshape(chunk, N)
            except EntropyExhausted as exc:
                recorded = max(done - plan.equil_sweeps, 0)
                partial = MagSeries(sums[:recorded, q] / float(N), L, s.label)
                raise TrajectoryAborted(f"entropy exhausted after {done} sweeps: {exc}", done, partial) from exc
        _kernels.sweep_external(spins, raws, t4, t8, chunk, totals, out, off)
        done += chunk
    draws = [s.draws - d for s, d in zip(streams, start_draws)]
    return BatchRun(L, sums, draws, [s.label for s in streams], {"spins": spins})


def run_trajectory(
    plan: TrajectoryPlan,
    streams,
    beta: float | None = None,
    initial: LatticeState | None = None,
    master_seed: int = 0,
) -> MagSeries:
    batch = simulate_batch(plan, [streams], beta=beta, initial=initial)
    return batch.series(0, master_seed)


def _direct_products(x: np.ndarray, t_max: int) -> np.ndarray:
    T = len(x)
    return np.array([np.dot(x[: T - t], x[t:]) for t in range(t_max + 1)])


def _fft_products(x: np.ndarray, t_max: int) -> np.ndarray:
    T = len(x)
    nfft = 1 << (2 * T - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    return np.fft.irfft(f * np.conj(f), nfft)[: t_max + 1]


def autocorrelation(series, t_max: int, method: str = "auto") -> CorrelationEstimate:
    """Time-averaged, non mean-subtracted magnetization correlation, chi(0) = 1."""
    x = np.asarray(series.values if isinstance(series, MagSeries) else series, dtype=np.float64)
    T = len(x)
    if not 0 <= t_max < T:
        raise ValueError(f"t_max must be in [0, {T}), got {t_max}")
    if method == "auto":
        method = "direct" if T * (t_max + 1) <= 20_000_000 else "fft"
    if method == "direct":
        prod = _direct_products(x, t_max)
    elif method == "fft":
        prod = _fft_products(x, t_max)
    else:
        raise ValueError(f"unknown method {method!r}")
    raw = prod / (T - np.arange(t_max + 1))
    if not raw[0] > 0:
        raise DegenerateSeries("series has zero power; correlation is undefined")
    chi = raw / raw[0]
    chi[0] = 1.0
    return CorrelationEstimate(chi, t_max)


def default_t_max(plan: TrajectoryPlan, factor: float = 3.0) -> int:
    return min(int(math.ceil(factor * plan.tau_approx)), plan.run_sweeps - 1)
