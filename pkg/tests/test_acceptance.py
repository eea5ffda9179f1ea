"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

The long experiments (criteria 4 to 7) are cached on disk by
``acceptance_runs.py``; see that module for how to refresh them.
"""

import itertools
import math
import os
import time

import numpy as np
import pytest

from isingbench import _kernels
from isingbench.fitting import extrapolate_kappa_zero, fit_exponential, fit_power_law, plateau_value
from isingbench.harness.budget import TABLE_Z_PLAN, estimate_budget
from isingbench.harness.experiment import run_experiment
from isingbench.harness.config import ExperimentConfig, RngSpec
from isingbench.ising import acceptance_table, critical_beta, raw_thresholds
from isingbench.rng import PRNG0, PRNG1, PRNG2, PRNG3, LcgStream, SplitMix64Stream, draw_site_seeds, lcg_next

import acceptance_runs as runs


def boltzmann_l2(beta):
    """Exact distribution of the 16 configurations of the periodic 2x2 lattice."""
    probs = {}
    for bits in itertools.product((1, -1), repeat=4):
        s = np.array(bits).reshape(2, 2)
        h = 0
        for i in range(2):
            for j in range(2):
                h -= s[i, j] * (s[(i + 1) % 2, j] + s[i, (j + 1) % 2])
        probs[bits] = math.exp(-beta * h)
    z = math.fsum(probs.values())
    return {k: v / z for k, v in probs.items()}


STRIPES = {(1, 1, -1, -1), (-1, -1, 1, 1), (1, -1, 1, -1), (-1, 1, -1, 1)}


def _code(bits):
    return sum(w for w, b in zip((8, 4, 2, 1), bits) if b < 0)


def _l2_chains(initial, sweeps, burn, seed):
    """Histogram of configurations after each sweep of R independent L=2 chains.

    Every chain owns a PRNG1 stream and runs through the production kernel.
    """
    R = initial.shape[2]
    seeds = draw_site_seeds(SplitMix64Stream(seed), PRNG1, R)
    streams = [LcgStream(PRNG1, x) for x in seeds]
    t4, t8 = raw_thresholds(acceptance_table(critical_beta()), PRNG1.modulus)
    spins = initial.astype(np.float64).copy()
    totals = spins.sum(axis=(0, 1))
    none = np.zeros((0, R), dtype=np.int16)
    weights = np.array([8, 4, 2, 1])[:, None]
    counts = np.zeros(16, dtype=np.int64)
    chunk = min(500, burn + sweeps)
    done = 0
    while done < burn + sweeps:
        n = min(chunk, burn + sweeps - done)
        raws = np.stack([s.next_raw_block(n * 4).reshape(n, 4) for s in streams], axis=2)
        for k in range(n):
            _kernels.sweep_external(spins, raws[k : k + 1], t4, t8, 1, totals, none, 0)
            if done + k >= burn:
                code = ((spins.reshape(4, R) < 0) * weights).sum(axis=0)
                counts += np.bincount(code, minlength=16)
        done += n
    return counts


def _tv(counts, probs):
    total = counts.sum()
    return 0.5 * sum(abs(counts[_code(b)] / total - p) for b, p in probs.items())


def test_c1_boltzmann_oracle(verdict):
    t0 = time.perf_counter()
    exact = boltzmann_l2(critical_beta())
    states = list(exact)
    # ensemble started from the exact distribution (independent RNG): 10^4 chains x 100 sweeps
    pick = np.random.default_rng(11).choice(len(states), size=10_000, p=[exact[b] for b in states])
    initial = np.stack([np.array(states[i]).reshape(2, 2) for i in pick], axis=2)
    ens = _l2_chains(initial, 100, 0, 1)
    tv = _tv(ens, exact)
    # cold start: the stripe states form a closed class the all-up chain never enters,
    # so its distribution is the Boltzmann law conditioned on the complement
    cold = _l2_chains(np.ones((2, 2, 100)), 10_000, 100, 2)
    stripe_mass = math.fsum(exact[b] for b in STRIPES)
    cond = {b: (0.0 if b in STRIPES else p / (1 - stripe_mass)) for b, p in exact.items()}
    tv_cold, tv_cond = _tv(cold, exact), _tv(cold, cond)
    visited = sum(cold[_code(b)] for b in STRIPES)
    dt = time.perf_counter() - t0
    ok = ens.sum() == 10**6 and tv < 0.01 and tv_cond < 0.01 and visited == 0 and abs(tv_cold - stripe_mass) < 0.01 and dt < 60
    verdict("C1 Boltzmann oracle L=2", ok,
            f"TV={tv:.5f} over {ens.sum()} sweeps from exact starts (<0.01); all-up start: TV={tv_cold:.4f} "
            f"= closed stripe-class mass {stripe_mass:.4f}, TV to conditional law {tv_cond:.5f}; {dt:.1f}s")


def test_c2_lcg_oracle(verdict):
    t0 = time.perf_counter()
    ok = True
    for p in (PRNG0, PRNG1, PRNG2, PRNG3):
        seed = 2718281 % p.modulus
        s = LcgStream(p, seed)
        got = s.next_raw_block(10_000)
        x = seed
        for k in range(10_000):
            x = (p.multiplier * x) % p.modulus
            ok &= int(got[k]) == x
        ok &= int(got[-1]) == pow(p.multiplier, 10_000, p.modulus) * seed % p.modulus
    x, n = lcg_next(1, PRNG3), 1
    while x != 1:
        x, n = lcg_next(x, PRNG3), n + 1
    dt = time.perf_counter() - t0
    verdict("C2 LCG oracle equivalence", ok and n == 131070 and dt < 1.0,
            f"4 generators x 10^4 steps match, PRNG3 period={n}, {dt:.2f}s")


def test_c3_fit_oracles(verdict):
    t0 = time.perf_counter()
    t = np.arange(400)
    fit = fit_exponential(np.exp(-t / 100.0), 100.0)
    z = fit_power_law([(L, 0.5 * L**2.1667) for L in (4, 8, 16, 32, 64, 128)])
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        noisy = np.exp(-t / 100.0) * (1 + 0.01 * rng.standard_normal(len(t)))
        worst = max(worst, abs(fit_exponential(noisy, 100.0).tau - 100.0) / 100.0)
    dt = time.perf_counter() - t0
    ok = (abs(fit.tau - 100) < 1e-9 and fit.residual < 1e-9 and abs(z.z - 2.1667) < 1e-9
          and abs(z.tau0 - 0.5) < 1e-9 and z.residual < 1e-9 and worst <= 0.02 and dt < 1.0)
    verdict("C3 fit oracles", ok,
            f"tau err={abs(fit.tau - 100):.1e}, z err={abs(z.z - 2.1667):.1e}, "
            f"resid={max(fit.residual, z.residual):.1e}, worst noisy tau err={100 * worst:.2f}% (<=2%), {dt:.2f}s")


@pytest.fixture(scope="module")
def z_result():
    return runs.z_experiment()


@pytest.mark.slow
def test_c4_desk_scale_z(verdict, z_result):
    z = z_result.zfit
    summ = sorted(z_result.summaries.items())
    taus = ", ".join(f"L={L}:{s.mean_tau:.1f}" for L, s in summ)
    n = {s.n_iterations for s in z_result.summaries.values()}
    # successive-doubling exponents expose corrections to scaling at small L
    local = ", ".join(
        f"{a}->{b}:{math.log(tb.mean_tau / ta.mean_tau) / math.log(b / a):.3f}" for (a, ta), (b, tb) in zip(summ, summ[1:])
    )
    # sampling error of z alone, from the spread of ln(mean tau) at each side
    x = np.log([L for L, _ in summ])
    sd_ln = np.sqrt([s.normalized / s.n_iterations for _, s in summ])
    w = (x - x.mean()) / ((x - x.mean()) ** 2).sum()
    z_stat = math.sqrt(float((w**2 * sd_ln**2).sum()))
    verdict("C4 desk-scale z (PRNG1, L=4..64, N_it=50)", 2.05 <= z.z <= 2.30 and n == {50},
            f"z={z.z:.4f} (fit stderr {z.z_stderr:.4f}, sampling sd {z_stat:.4f}) in [2.05, 2.30]; "
            f"local exponents {local}; mean tau {taus}")


@pytest.mark.slow
def test_c5_variance_explosion(verdict):
    plain = runs.prng3_experiment()
    reseeded = runs.prng3_experiment(runs.KAPPAS[2])
    nv = {L: s.normalized for L, s in plain.summaries.items()}
    nk = {L: s.normalized for L, s in reseeded.summaries.items()}
    ratio = nv[32] / nv[4]
    worst_k = max(v / nk[4] for v in nk.values())
    fmt = lambda d: ", ".join(f"{L}:{v:.4g}" for L, v in sorted(d.items()))
    verdict("C5 variance explosion (PRNG3)", ratio >= 5 and worst_k <= 3,
            f"no reseed nv(32)/nv(4)={ratio:.1f} (>=5); kappa=1 max nv(L)/nv(4)={worst_k:.2f} (<=3); "
            f"nv no-reseed [{fmt(nv)}], kappa=1 [{fmt(nk)}]")


@pytest.mark.slow
def test_c6_kappa_extrapolation(verdict):
    synthetic = [(k, 0.004 + 0.0123 * k) for k in (0.25, 0.5, 1.0, 2.0)]
    exact = abs(extrapolate_kappa_zero(synthetic) - 0.004)
    import warnings

    plateaus = {}
    for k in runs.KAPPAS:
        res = runs.prng3_experiment(k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plateaus[k] = plateau_value([(L, s.normalized) for L, s in res.summaries.items()]).value
    intercept = extrapolate_kappa_zero([(float(k), v) for k, v in plateaus.items()])
    smallest = min(plateaus.values())
    detail = ", ".join(f"kappa={k}:{v:.5f}" for k, v in plateaus.items())
    verdict("C6 kappa->0 extrapolation", exact < 1e-12 and 0 < intercept < smallest,
            f"synthetic err={exact:.1e} (<1e-12); intercept={intercept:.5f} in (0, {smallest:.5f}); plateaus {detail}")


@pytest.mark.slow
def test_c7_entropy_accounting(verdict, z_result):
    records = list(z_result.records)
    records += [r for k in (None, *runs.KAPPAS) for r in runs.prng3_experiment(k).records]
    bad = 0
    for r in records:
        cfg = z_result.config
        p = (cfg.run_multiple + cfg.equil_multiple) * round(r.side**cfg.z_approx)
        bad += r.draws != p * r.side**2
    b = estimate_budget(16, TABLE_Z_PLAN, 100, bits_per_number=2)
    err = abs(b.gibibytes - 3.2) / 3.2
    ok = bad == 0 and b.sweeps == 533192 and b.numbers_per_sweep * b.bits_per_number == 512 and err < 0.10
    verdict("C7 entropy accounting", ok,
            f"{len(records) - bad}/{len(records)} runs with draws == (equil+run)*L^2; L=16 row: sweeps={b.sweeps} "
            f"(533192), {b.numbers_per_sweep * b.bits_per_number} bits/update, {b.gigabytes:.2f} GB = {b.gibibytes:.2f} GiB "
            f"vs 3.2 ({100 * err:.1f}% off, <10%)")


@pytest.mark.slow
def test_c8_determinism(verdict, tmp_path):
    blobs = {}
    for w in (1, 2, 8):
        cfg = ExperimentConfig(sides=(4, 8, 16), default_iterations=6, rng=RngSpec("prng1"), master_seed=8,
                               output_dir=str(tmp_path / f"w{w}"), worker_count=w, batch_size=2)
        run_experiment(cfg)
        with open(os.path.join(cfg.output_dir, "runs.csv"), "rb") as fh:
            blobs[w] = fh.read()
    same = blobs[1] == blobs[2] == blobs[8]
    verdict("C8 determinism (workers 1, 2, 8)", same, f"runs.csv byte-identical: {same} ({len(blobs[1])} bytes)")
