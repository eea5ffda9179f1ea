"""Random number generator benchmarks from kinetic Ising critical dynamics."""

from .dynamics import MagSeries, TrajectoryPlan, autocorrelation, run_trajectory, simulate_batch
from .fitting import fit_exponential, fit_power_law, normalized_variance
from .ising import LatticeState, critical_beta, full_sweep, half_sweep, magnetization
from .rng import PRNG0, PRNG1, PRNG2, PRNG3, LcgParams, LcgStream, SiteStreams, lcg_next

__version__ = "0.1.0"
