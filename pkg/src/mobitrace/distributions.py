"""Population-level distributions: jumps, waits, gyration radii, tail fits."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from .errors import (
    BadArgument,
    BadBinning,
    EmptyPopulation,
    NoConvergence,
    TooFewSamples,
    TooShort,
)
from .fmt import sig9
from .kernel import MobilitySummary
from .store import Trajectory

logger = logging.getLogger("mobitrace.distributions")

BETA_RANGE = (0.1, 5.0)
GRID_POINTS = 25
SIMPLEX_TOL = 1e-8
SIMPLEX_MAX_ITER = 500


# -- per-trajectory sequences ------------------------------------------------


def jump_sizes(traj: Trajectory) -> np.ndarray:
    """Euclidean displacement between consecutive activities, length n-1."""
    if traj.n < 2:
        raise TooShort(f"need at least 2 points, trajectory has {traj.n}")
    steps = np.diff(traj.xy, axis=0)
    return np.hypot(steps[:, 0], steps[:, 1])


def waiting_times(traj: Trajectory) -> np.ndarray:
    """Seconds between consecutive activities, length n-1, each >= 0."""
    if traj.n < 2:
        raise TooShort(f"need at least 2 points, trajectory has {traj.n}")
    return np.diff(traj.times)


def population_jump_sizes(trajectories: dict[str, Trajectory]) -> np.ndarray:
    """All jump sizes over users with n >= 2, in sorted user order."""
    parts = [jump_sizes(t) for t in trajectories.values() if t.n >= 2]
    return np.concatenate(parts) if parts else np.empty(0)


def population_waiting_times(trajectories: dict[str, Trajectory]) -> np.ndarray:
    parts = [waiting_times(t) for t in trajectories.values() if t.n >= 2]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


# -- histograms --------------------------------------------------------------


@dataclass(slots=True)
class Histogram:
    """Binned counts with explicit out-of-range tallies."""

    kind: str  # "linear" | "logarithmic"
    edges: np.ndarray
    counts: np.ndarray
    total: int
    underflow: int
    overflow: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def density(self) -> np.ndarray:
        """PDF view: counts / (total * width); zero for an empty histogram."""
        if self.total == 0:
            return np.zeros_like(self.widths)
        return self.counts / (self.total * self.widths)

    def merge(self, other: "Histogram") -> "Histogram":
        """Componentwise sum; edges must match exactly."""
        if self.kind != other.kind or not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different binning")
        return Histogram(
            kind=self.kind,
            edges=self.edges,
            counts=self.counts + other.counts,
            total=self.total + other.total,
            underflow=self.underflow + other.underflow,
            overflow=self.overflow + other.overflow,
        )


def histogram_from_edges(
    values: Sequence[float] | np.ndarray, edges: Sequence[float] | np.ndarray, kind: str = "linear"
) -> Histogram:
    """Count values into half-open bins [e_k, e_k+1); outside goes to the
    underflow/overflow tallies, so every input value is accounted for."""
    edge_arr = np.asarray(edges, dtype=np.float64)
    if edge_arr.ndim != 1 or edge_arr.size < 2 or not np.all(np.diff(edge_arr) > 0):
        raise BadBinning("edges must be a strictly increasing vector of 2 or more values")
    vals = np.asarray(values, dtype=np.float64)
    total = int(vals.size)
    underflow = int(np.count_nonzero(vals < edge_arr[0]))
    overflow = int(np.count_nonzero(vals >= edge_arr[-1]))
    idx = np.searchsorted(edge_arr, vals, side="right") - 1
    in_range = (idx >= 0) & (idx < edge_arr.size - 1)
    counts = np.bincount(idx[in_range], minlength=edge_arr.size - 1).astype(np.int64)
    return Histogram(kind, edge_arr, counts, total, underflow, overflow)


def log_binned_histogram(
    values: Sequence[float] | np.ndarray, base: float, start: float, n_bins: int
) -> Histogram:
    """Geometric bins edge_k = start * base**k for k = 0..n_bins."""
    if not (base > 1.0 and start > 0.0 and n_bins >= 1):
        raise BadBinning(f"need base > 1, start > 0, n_bins >= 1; got {base}, {start}, {n_bins}")
    edges = start * np.power(float(base), np.arange(n_bins + 1))
    return histogram_from_edges(values, edges, kind="logarithmic")


def linear_binned_histogram(
    values: Sequence[float] | np.ndarray, lo: float, hi: float, n_bins: int
) -> Histogram:
    if not (hi > lo and n_bins >= 1):
        raise BadBinning(f"need hi > lo and n_bins >= 1; got {lo}, {hi}, {n_bins}")
    return histogram_from_edges(values, np.linspace(lo, hi, n_bins + 1), kind="linear")


def rg_distribution(
    summaries: Iterable[MobilitySummary],
    edges: Sequence[float] | np.ndarray | None = None,
    log_bins: tuple[float, float, int] | None = None,
    lin_bins: tuple[float, float, int] | None = None,
) -> Histogram:
    """Histogram of per-user gyration radii.

    Pass exactly one binning: explicit edges, log_bins=(base, start, n), or
    lin_bins=(lo, hi, n); the default is log bins (2, 0.1, 12).
    """
    rgs = [s.rg for s in summaries]
    if not rgs:
        raise EmptyPopulation("no summaries to aggregate")
    given = [b is not None for b in (edges, log_bins, lin_bins)]
    if sum(given) > 1:
        raise BadBinning("give at most one binning")
    if edges is not None:
        return histogram_from_edges(rgs, edges)
    if lin_bins is not None:
        return linear_binned_histogram(rgs, *lin_bins)
    base, start, n_bins = log_bins if log_bins is not None else (2.0, 0.1, 12)
    return log_binned_histogram(rgs, base, start, n_bins)


# -- gyration-radius bands ---------------------------------------------------


class RgBand(enum.Enum):
    LOW = "LOW"
    MID = "MID"
    HIGH = "HIGH"


def classify_band(rg: float) -> RgBand:
    """LOW below 10 km, MID in [10, 20), HIGH from 20 km up."""
    if not (isinstance(rg, (int, float)) and math.isfinite(rg)) or rg < 0:
        raise BadArgument(f"rg must be finite and non-negative, got {rg!r}")
    if rg < 10.0:
        return RgBand.LOW
    if rg < 20.0:
        return RgBand.MID
    return RgBand.HIGH


def band_census(summaries: Iterable[MobilitySummary]) -> dict[RgBand, int]:
    census = {RgBand.LOW: 0, RgBand.MID: 0, RgBand.HIGH: 0}
    for summary in summaries:
        census[classify_band(summary.rg)] += 1
    return census


def damped_exponent_law(rg: float) -> float:
    """The curve r**exp(-r): a power law whose exponent decays with r.

    Display diagnostic only; tends to 1 for large r and is not normalizable,
    so nothing fits against it.
    """
    if not (isinstance(rg, (int, float)) and math.isfinite(rg)) or rg <= 0:
        raise BadArgument(f"rg must be finite and positive, got {rg!r}")
    return float(rg) ** math.exp(-float(rg))


# -- truncated power-law fit -------------------------------------------------


@dataclass(frozen=True, slots=True)
class PowerLawFit:
    """MLE of p(r) = C * (r + r0)**(-beta) * exp(-r / kappa) on a range."""

    beta: float
    kappa: float
    r0: float
    log_likelihood: float
    n_samples: int
    fit_range: tuple[float, float]


def powerlaw_normalization(beta: float, kappa: float, r0: float, fit_range: tuple[float, float]) -> float:
    """Integral of the unnormalized density over the fit range.

    Integrated in log-r, where heavy tails flatten out, with adaptive
    quadrature at 1e-10 relative target.
    """
    r_min, r_max = fit_range

    def integrand(u: float) -> float:
        r = math.exp(u)
        return (r + r0) ** (-beta) * math.exp(-r / kappa) * r

    value, _ = quad(integrand, math.log(r_min), math.log(r_max), epsabs=0.0, epsrel=1e-10, limit=200)
    return value


def powerlaw_logpdf(
    r: np.ndarray | float, beta: float, kappa: float, r0: float, fit_range: tuple[float, float]
) -> np.ndarray | float:
    """Log density of the truncated power law, -inf outside the range."""
    norm = powerlaw_normalization(beta, kappa, r0, fit_range)
    arr = np.asarray(r, dtype=np.float64)
    out = np.full(arr.shape, -np.inf)
    inside = (arr >= fit_range[0]) & (arr <= fit_range[1])
    out[inside] = -beta * np.log(arr[inside] + r0) - arr[inside] / kappa - math.log(norm)
    if np.isscalar(r):
        return float(out)
    return out


def _neg_log_likelihood(
    beta: float, kappa: float, r0: float, samples: np.ndarray, fit_range: tuple[float, float]
) -> float:
    norm = powerlaw_normalization(beta, kappa, r0, fit_range)
    return float(
        beta * np.sum(np.log(samples + r0))
        + np.sum(samples) / kappa
        + samples.size * math.log(norm)
    )


def fit_truncated_power_law(
    samples: Sequence[float] | np.ndarray,
    r0_mode: str = "fixed",
    fit_range: tuple[float, float] = (1.0, 300.0),
) -> PowerLawFit:
    """Maximum-likelihood fit over the samples inside fit_range.

    Coarse grid (beta linear in [0.1, 5], kappa log-spaced in
    [r_min, 100 r_max], both 25 points) picks the basin; Nelder-Mead in
    (beta, ln kappa[, r0]) with hard walls at the grid box refines it.
    r0_mode is "fixed" (r0 = 0) or "free" (r0 >= 0 estimated).
    """
    r_min, r_max = float(fit_range[0]), float(fit_range[1])
    if not (0.0 < r_min < r_max):
        raise BadArgument(f"need 0 < r_min < r_max, got {fit_range}")
    if r0_mode not in ("fixed", "free"):
        raise BadArgument(f"r0_mode must be 'fixed' or 'free', got {r0_mode!r}")
    arr = np.asarray(samples, dtype=np.float64)
    arr = arr[(arr >= r_min) & (arr <= r_max)]
    if arr.size < 100:
        raise TooFewSamples(f"{arr.size} samples inside {fit_range}, need at least 100")
    span = (r_min, r_max)
    kappa_lo, kappa_hi = r_min, 100.0 * r_max
    r0_hi = r_max

    free_r0 = r0_mode == "free"
    beta_grid = np.linspace(BETA_RANGE[0], BETA_RANGE[1], GRID_POINTS)
    kappa_grid = np.geomspace(kappa_lo, kappa_hi, GRID_POINTS)
    r0_grid = [0.0] if not free_r0 else [0.0, r_min, 10.0 * r_min]

    best = (math.inf, BETA_RANGE[0], kappa_grid[0], 0.0)
    for r0 in r0_grid:
        for beta in beta_grid:
            for kappa in kappa_grid:
                nll = _neg_log_likelihood(beta, kappa, r0, arr, span)
                if nll < best[0]:
                    best = (nll, float(beta), float(kappa), float(r0))
    logger.debug("grid best: nll=%.6f beta=%.3f kappa=%.3f r0=%.3f", *best)

    def objective(params: np.ndarray) -> float:
        beta = params[0]
        kappa = math.exp(params[1])
        r0 = params[2] if free_r0 else 0.0
        if not (
            BETA_RANGE[0] <= beta <= BETA_RANGE[1]
            and kappa_lo <= kappa <= kappa_hi
            and 0.0 <= r0 <= r0_hi
        ):
            return math.inf
        return _neg_log_likelihood(beta, kappa, r0, arr, span)

    x0 = [best[1], math.log(best[2])] + ([best[3]] if free_r0 else [])
    result = minimize(
        objective,
        np.asarray(x0 if free_r0 else x0[:2]),
        method="Nelder-Mead",
        options={
            "xatol": SIMPLEX_TOL,
            "fatol": SIMPLEX_TOL,
            "maxiter": SIMPLEX_MAX_ITER,
            "maxfev": 10 * SIMPLEX_MAX_ITER,
        },
    )
    if not result.success:
        raise NoConvergence(f"simplex refinement did not converge: {result.message}")
    beta = float(result.x[0])
    kappa = float(math.exp(result.x[1]))
    r0 = float(result.x[2]) if free_r0 else 0.0
    log_likelihood = -float(result.fun)
    logger.info(
        "fit: beta=%.4f kappa=%.4f r0=%.4f loglik=%.4f n=%d", beta, kappa, r0, log_likelihood, arr.size
    )
    return PowerLawFit(beta, kappa, r0, log_likelihood, int(arr.size), span)


# -- tabular output ----------------------------------------------------------

HISTOGRAM_HEADER = "bin_lo,bin_hi,count,density"
BAND_HEADER = "band,count"


def write_histogram_csv(hist: Histogram, out: IO[str]) -> None:
    """One row per bin; nonzero out-of-range tallies append unbounded rows
    so the count column always sums to the number of inputs."""
    out.write(HISTOGRAM_HEADER + "\n")
    if hist.underflow:
        out.write(f"-inf,{sig9(hist.edges[0])},{hist.underflow},0\n")
    density = hist.density
    for k in range(hist.counts.size):
        out.write(
            f"{sig9(hist.edges[k])},{sig9(hist.edges[k + 1])},{int(hist.counts[k])},{sig9(density[k])}\n"
        )
    if hist.overflow:
        out.write(f"{sig9(hist.edges[-1])},inf,{hist.overflow},0\n")


def write_band_csv(census: dict[RgBand, int], out: IO[str]) -> None:
    out.write(BAND_HEADER + "\n")
    for band in (RgBand.LOW, RgBand.MID, RgBand.HIGH):
        out.write(f"{band.value},{census.get(band, 0)}\n")


def format_fit_report(fit: PowerLawFit) -> str:
    return (
        f"beta={sig9(fit.beta)} kappa={sig9(fit.kappa)} r0={sig9(fit.r0)} "
        f"loglik={sig9(fit.log_likelihood)} n={fit.n_samples}"
    )
