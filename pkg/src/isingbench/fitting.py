"""Relaxation-time and dynamic-exponent fits, plus variance diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import CorrelationEstimate

WINDOW_LO = 0.3
WINDOW_HI = 1.1
MIN_FIT_POINTS = 10
PLATEAU_SPREAD_LIMIT = 0.5


class FitError(ValueError):
    """A fit could not be performed; ``diagnostics`` says why."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PlateauWarning(UserWarning):
    pass


@dataclass
class TauFit:
    tau: float
    amplitude: float
    window: tuple
    residual: float
    side: int = 0
    first_pass_tau: float = float("nan")
    n_points: int = 0


@dataclass
class ZFit:
    z: float
    log_tau0: float
    z_stderr: float
    points: list
    residual: float = 0.0

    @property
    def tau0(self) -> float:
        return math.exp(self.log_tau0)


@dataclass
class VarianceSummary:
    side: int
    mean_tau: float
    variance_tau: float
    normalized: float
    n_iterations: int


@dataclass
class PlateauResult:
    value: float
    is_plateau: bool
    spread: float
    used: list = field(default_factory=list)


def _ols(x: np.ndarray, y: np.ndarray):
    """Slope, intercept, slope standard error and RMS residual."""
    n = len(x)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    slope = float(dx @ (y - ym)) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    stderr = math.sqrt(rss / (n - 2) / sxx) if n > 2 else float("nan")
    return slope, intercept, stderr, math.sqrt(rss / n)


def fit_window(tau_guess: float, t_max: int) -> tuple[int, int]:
    lo = max(int(math.ceil(WINDOW_LO * tau_guess)), 0)
    hi = min(int(math.floor(WINDOW_HI * tau_guess)), t_max)
    return lo, hi


def _fit_once(chi: np.ndarray, window: tuple[int, int], side: int) -> TauFit:
    lo, hi = window
    t = np.arange(lo, hi + 1)
    c = chi[lo : hi + 1]
    keep = c > 0
    diag = {"window": window, "side": side, "points_in_window": int(len(t)), "positive_points": int(keep.sum())}
    if keep.sum() < MIN_FIT_POINTS:
        raise FitError(f"only {int(keep.sum())} usable points in window {window}", diag)
    t, y = t[keep].astype(np.float64), np.log(c[keep])
    slope, intercept, _, rms = _ols(t, y)
    if not slope < 0:
        diag["slope"] = slope
        raise FitError("correlation does not decay over the fit window", diag)
    return TauFit(-1.0 / slope, math.exp(intercept), (int(lo), int(hi)), rms, side, n_points=int(keep.sum()))


def fit_exponential(chi, tau_guess: float, side: int = 0, refine: int = 1) -> TauFit:
    """Log-linear least squares of chi(t) over [0.3, 1.1] x the relaxation time.

    The first window comes from ``tau_guess``; each refinement pass rebuilds
    the window from the previous estimate.
    """
    values = chi.chi if isinstance(chi, CorrelationEstimate) else np.asarray(chi, dtype=np.float64)
    t_max = len(values) - 1
    if not tau_guess > 0:
        raise FitError("tau_guess must be positive", {"tau_guess": tau_guess})
    fit = _fit_once(values, fit_window(tau_guess, t_max), side)
    first = fit.tau
    for _ in range(refine):
        fit = _fit_once(values, fit_window(fit.tau, t_max), side)
    fit.first_pass_tau = first
    return fit


def fit_power_law(points: Sequence[tuple[float, float]]) -> ZFit:
    """OLS of ln(tau) against ln(L) with an offset: tau = tau0 * L**z."""
    pts = [(float(L), float(tau)) for L, tau in points]
    if len(pts) < 3:
        raise FitError("need at least three (L, tau) points", {"n_points": len(pts)})
    if len({L for L, _ in pts}) != len(pts):
        raise FitError("lattice sides must be distinct", {"sides": [L for L, _ in pts]})
    if any(tau <= 0 or L <= 0 for L, tau in pts):
        raise FitError("sides and relaxation times must be positive", {"points": pts})
    x = np.log([L for L, _ in pts])
    y = np.log([tau for _, tau in pts])
    z, log_tau0, stderr, rms = _ols(x, y)
    return ZFit(z, log_tau0, stderr, pts, rms)


def normalized_variance(taus: Sequence[float], side: int = 0) -> VarianceSummary:
    x = np.asarray(taus, dtype=np.float64)
    if len(x) < 2:
        raise FitError("need at least two samples", {"n": len(x)})
    mu = math.fsum(x) / len(x)
    if mu == 0:
        raise FitError("mean is zero; normalized variance undefined")
    var = math.fsum((x - mu) ** 2) / (len(x) - 1)
    return VarianceSummary(side, mu, var, var / (mu * mu), len(x))


def extrapolate_kappa_zero(points: Sequence[tuple[float, float]]) -> float:
    """Intercept at kappa = 0 of the least-squares line through (kappa, variance)."""
    pts = [(float(k), float(v)) for k, v in points]
    if len({k for k, _ in pts}) < 2:
        raise FitError("need at least two distinct kappa values", {"points": pts})
    x = np.array([k for k, _ in pts])
    y = np.array([v for _, v in pts])
    _, intercept, _, _ = _ols(x, y)
    return intercept


def plateau_value(variances_by_L: Sequence[tuple[int, float]]) -> PlateauResult:
    """Mean normalized variance over the larger half of the lattice sides.

    A relative spread (max - min) / mean above 50% in that half flags the
    curve as still growing rather than flat; a :class:`PlateauWarning` is
    issued and ``is_plateau`` is False.
    """
    pts = sorted((int(L), float(v)) for L, v in variances_by_L)
    if not pts:
        raise FitError("no variance values")
    n_top = math.ceil(len(pts) / 2)
    top = pts[-n_top:]
    vals = np.array([v for _, v in top])
    value = math.fsum(vals) / len(vals)
    spread = float((vals.max() - vals.min()) / value) if value else 0.0
    ok = spread <= PLATEAU_SPREAD_LIMIT
    if not ok:
        warnings.warn(f"no plateau: upper-half relative spread {spread:.2f}", PlateauWarning, stacklevel=2)
    return PlateauResult(value, ok, spread, top)


def relative_error(z: float, z_ref: float) -> float:
    return abs(z - z_ref) / z_ref
