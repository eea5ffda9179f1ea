"""Heavy acceptance experiments with an on-disk cache.

Each experiment writes its full output directory under the cache root.  A run
is reused only when the stored ``config.txt`` equals the current config text and
the stored package version matches, so any change to the configuration reruns
it.  Set ``ISINGBENCH_ACCEPTANCE_REFRESH=1`` to force reruns.

``python tests/acceptance_runs.py`` fills the cache ahead of the pytest session.
"""

from __future__ import annotations

import os
import sys
from fractions import Fraction

import isingbench
from isingbench.harness.config import ExperimentConfig, RngSpec
from isingbench.harness.experiment import aggregate, kappa_label, run_experiment
from isingbench.harness.report import read_runs

HERE = os.path.dirname(os.path.abspath(__file__))
CACHE_ROOT = os.environ.get("ISINGBENCH_ACCEPTANCE_CACHE", os.path.join(HERE, "..", "acceptance_runs"))
REFRESH = os.environ.get("ISINGBENCH_ACCEPTANCE_REFRESH", "") not in ("", "0")
WORKERS = os.environ.get("ISINGBENCH_WORKERS", "auto")

KAPPAS = (Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(2))


def z_config() -> ExperimentConfig:
    return ExperimentConfig(sides=(4, 8, 16, 32, 64), default_iterations=50, rng=RngSpec("prng1"), master_seed=20221)


def prng3_config(kappa=None) -> ExperimentConfig:
    return ExperimentConfig(sides=(4, 8, 16, 32), default_iterations=50, rng=RngSpec("prng3", kappa=kappa), master_seed=4242)


def _dirname(name):
    return os.path.join(os.path.abspath(CACHE_ROOT), name)


def cached_experiment(name: str, config: ExperimentConfig):
    out = _dirname(name)
    config = config.with_overrides(output_dir=out, worker_count=WORKERS)
    stamp = os.path.join(out, "VERSION")
    cfg = os.path.join(out, "config.txt")
    runs = os.path.join(out, "runs.csv")
    if not REFRESH and all(os.path.exists(p) for p in (stamp, cfg, runs)):
        with open(cfg) as fh, open(stamp) as fv:
            if fh.read() == config.to_text() and fv.read().strip() == isingbench.__version__:
                return aggregate(read_runs(runs), config)
    result = run_experiment(config)
    with open(stamp, "w") as fh:
        fh.write(isingbench.__version__ + "\n")
    return result


def z_experiment():
    return cached_experiment("z_prng1", z_config())


def prng3_experiment(kappa=None):
    name = "prng3_no_reseed" if kappa is None else f"prng3_kappa_{kappa_label(kappa)}"
    return cached_experiment(name, prng3_config(kappa))


if __name__ == "__main__":
    which = sys.argv[1:] or ["prng3", "kappa", "z"]
    if "prng3" in which:
        print("prng3 no reseed", prng3_experiment().summaries, flush=True)
    if "kappa" in which:
        for k in KAPPAS:
            r = prng3_experiment(k)
            print("kappa", k, {L: s.normalized for L, s in r.summaries.items()}, flush=True)
    if "z" in which:
        r = z_experiment()
        print("z", r.zfit, flush=True)
