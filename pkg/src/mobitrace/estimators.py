"""Estimator-style adapters over the mobility kernels.

These wrap the functional core in the fit/transform/predict idiom so the
toolkit composes with pipelines and model-selection utilities. They hold no
logic of their own: every number comes from the kernel and distribution
modules.
"""

from __future__ import annotations

import numbers
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, check_random_state

from .distributions import (
    classify_band,
    fit_truncated_power_law,
    powerlaw_logpdf,
)
from .errors import BadArgument
from .kernel import summarize
from .store import Trajectory
from .synth import TruncatedPowerLawSampler

FEATURE_NAMES = (
    "n_events",
    "x_cm",
    "y_cm",
    "rg_km",
    "theta_rad",
    "mu_km2",
    "sigma_x_km",
    "sigma_y_km",
)


def _as_trajectories(X: Iterable[Trajectory]) -> list[Trajectory]:
    out = list(X)
    for item in out:
        if not isinstance(item, Trajectory):
            raise BadArgument(f"expected Trajectory inputs, got {type(item).__name__}")
    return out


def _as_sample_vector(X) -> np.ndarray:
    """Accept a 1-d sequence or an (n, 1) column and return float64 (n,)."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise BadArgument(f"expected a vector of samples, got shape {arr.shape}")
    return arr


class MobilityFeatures(TransformerMixin, BaseEstimator):
    """Per-trajectory summary statistics as a fixed-width feature matrix.

    Stateless: fit only validates. Columns follow FEATURE_NAMES.
    """

    def fit(self, X: Iterable[Trajectory], y=None) -> "MobilityFeatures":
        _as_trajectories(X)
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def transform(self, X: Iterable[Trajectory]) -> np.ndarray:
        trajectories = _as_trajectories(X)
        rows = np.empty((len(trajectories), len(FEATURE_NAMES)), dtype=np.float64)
        for i, traj in enumerate(trajectories):
            s = summarize(traj)
            rows[i] = (s.n, s.com.x, s.com.y, s.rg, s.theta, s.mu, s.sigma_x, s.sigma_y)
        return rows

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.asarray(FEATURE_NAMES, dtype=object)


class TruncatedPowerLawMLE(BaseEstimator):
    """Density estimator for p(r) ~ (r + r0)^-beta * exp(-r / kappa).

    fit() runs the grid-seeded simplex MLE on the samples that fall inside
    [r_min, r_max]; score_samples/score follow the density-estimator
    convention (per-sample log density, total log likelihood). sample()
    draws from the fitted density.
    """

    def __init__(self, r_min: float = 1.0, r_max: float = 300.0, r0_mode: str = "fixed"):
        self.r_min = r_min
        self.r_max = r_max
        self.r0_mode = r0_mode

    def fit(self, X, y=None) -> "TruncatedPowerLawMLE":
        samples = _as_sample_vector(X)
        result = fit_truncated_power_law(
            samples, r0_mode=self.r0_mode, fit_range=(self.r_min, self.r_max)
        )
        self.beta_ = result.beta
        self.kappa_ = result.kappa
        self.r0_ = result.r0
        self.log_likelihood_ = result.log_likelihood
        self.n_samples_ = result.n_samples
        return self

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "beta_")
        samples = _as_sample_vector(X)
        return np.asarray(
            powerlaw_logpdf(samples, self.beta_, self.kappa_, self.r0_, (self.r_min, self.r_max))
        )

    def score(self, X, y=None) -> float:
        return float(np.sum(self.score_samples(X)))

    def sample(self, n_samples: int = 1, random_state=None) -> np.ndarray:
        check_is_fitted(self, "beta_")
        rng = check_random_state(random_state)
        sampler = TruncatedPowerLawSampler(
            self.beta_, self.kappa_, self.r_min, self.r_max, self.r0_
        )
        # bridge the legacy RandomState to the Generator API the sampler uses
        generator = np.random.default_rng(rng.randint(0, 2**32))
        return sampler.sample(n_samples, generator)


class RgBandClassifier(ClassifierMixin, BaseEstimator):
    """Rule-based LOW/MID/HIGH labeling of gyration radii.

    The thresholds are fixed by definition, so fit() only records the label
    set; it exists to satisfy the estimator contract.
    """

    def fit(self, X, y=None) -> "RgBandClassifier":
        _as_sample_vector(X)
        self.classes_ = np.asarray(["HIGH", "LOW", "MID"], dtype=object)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        values = _as_sample_vector(X)
        return np.asarray([classify_band(float(v)).value for v in values], dtype=object)
