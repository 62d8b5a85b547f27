import math

import numpy as np
import pytest
from scipy.special import exp1

from conftest import rel_close
from mobitrace.distributions import (
    BETA_RANGE,
    fit_truncated_power_law,
    powerlaw_logpdf,
    powerlaw_normalization,
)
from mobitrace.errors import BadArgument, TooFewSamples
from mobitrace.synth import TruncatedPowerLawSampler

FIT_RANGE = (1.0, 300.0)


# -- normalization against closed forms --------------------------------------
# The implementation integrates numerically; every expected value here comes
# from an antiderivative evaluated by hand, so the routes share nothing.


def test_normalization_pure_exponential():
    # beta = 0: integral of exp(-r/kappa) is kappa * (exp(-a/kappa) - exp(-b/kappa))
    expected = 50.0 * (math.exp(-1.0 / 50.0) - math.exp(-300.0 / 50.0))
    assert rel_close(powerlaw_normalization(0.0, 50.0, 0.0, FIT_RANGE), expected, 1e-9)


def test_normalization_inverse_first_power():
    # beta = 1: integral of exp(-r/kappa)/r is E1(a/kappa) - E1(b/kappa)
    expected = float(exp1(1.0 / 50.0) - exp1(300.0 / 50.0))
    assert rel_close(powerlaw_normalization(1.0, 50.0, 0.0, FIT_RANGE), expected, 1e-9)


def test_normalization_pure_power_law():
    # kappa huge turns off the cutoff; integral of r**-2 over [1, 300]
    assert rel_close(powerlaw_normalization(2.0, 1e15, 0.0, FIT_RANGE), 1.0 - 1.0 / 300.0, 1e-9)


def test_normalization_with_offset():
    # beta = 1 with r0 = 5 and no cutoff: log((300 + 5) / (1 + 5))
    assert rel_close(powerlaw_normalization(1.0, 1e15, 5.0, FIT_RANGE), math.log(305.0 / 6.0), 1e-9)


# -- log density -------------------------------------------------------------


def test_logpdf_integrates_to_one():
    # fixed-order Gauss-Legendre in log r, independent of the adaptive route
    nodes, weights = np.polynomial.legendre.leggauss(200)
    lo, hi = math.log(FIT_RANGE[0]), math.log(FIT_RANGE[1])
    u = 0.5 * (hi + lo) + 0.5 * (hi - lo) * nodes
    r = np.exp(u)
    pdf = np.exp(powerlaw_logpdf(r, 1.5, 50.0, 0.0, FIT_RANGE))
    integral = 0.5 * (hi - lo) * float(np.sum(weights * pdf * r))
    assert rel_close(integral, 1.0, 1e-10)


def test_logpdf_outside_range_is_minus_inf():
    out = powerlaw_logpdf(np.array([0.5, 2.0, 301.0]), 1.5, 50.0, 0.0, FIT_RANGE)
    assert out[0] == -math.inf
    assert math.isfinite(out[1])
    assert out[2] == -math.inf


def test_logpdf_scalar_round_trip():
    value = powerlaw_logpdf(10.0, 1.5, 50.0, 0.0, FIT_RANGE)
    assert isinstance(value, float)
    vec = powerlaw_logpdf(np.array([10.0]), 1.5, 50.0, 0.0, FIT_RANGE)
    assert value == vec[0]


def test_logpdf_ratio_matches_unnormalized_form():
    # normalization cancels in differences, leaving pure algebra
    a, b = 2.0, 10.0
    beta, kappa, r0 = 1.7, 40.0, 3.0
    got = powerlaw_logpdf(a, beta, kappa, r0, FIT_RANGE) - powerlaw_logpdf(b, beta, kappa, r0, FIT_RANGE)
    expected = -beta * (math.log(a + r0) - math.log(b + r0)) - (a - b) / kappa
    assert rel_close(got, expected, 1e-12)


# -- maximum-likelihood fit --------------------------------------------------


def draws(beta, kappa, n, seed):
    sampler = TruncatedPowerLawSampler(beta=beta, kappa=kappa, r_min=1.0, r_max=300.0)
    return sampler.sample(n, np.random.default_rng(seed))


def test_fit_recovers_sampler_parameters():
    fit = fit_truncated_power_law(draws(1.5, 50.0, 20_000, seed=11))
    assert abs(fit.beta - 1.5) <= 0.05
    assert abs(fit.kappa - 50.0) <= 5.0
    assert fit.r0 == 0.0
    assert fit.n_samples == 20_000
    assert fit.fit_range == FIT_RANGE


def test_fit_log_likelihood_is_consistent():
    samples = draws(1.5, 50.0, 5_000, seed=3)
    fit = fit_truncated_power_law(samples)
    inside = samples[(samples >= FIT_RANGE[0]) & (samples <= FIT_RANGE[1])]
    recomputed = float(np.sum(powerlaw_logpdf(inside, fit.beta, fit.kappa, fit.r0, fit.fit_range)))
    assert rel_close(fit.log_likelihood, recomputed, 1e-10)


def test_fit_exponential_boundary():
    # Pure exponential data pins beta at the search floor (0.1), and the
    # leftover r**-0.1 factor biases kappa upward by a known amount: the KL
    # projection solves E_q[r] = E_p[r] at the floor, giving 55.467 for a
    # generator kappa of 50 on [1, 300] (solved independently by bisection
    # on the moment equation). The fit must land on that projection, and
    # the generator's kappa must still be recovered to order of magnitude.
    fit = fit_truncated_power_law(draws(0.0, 50.0, 20_000, seed=5))
    assert fit.beta == pytest.approx(0.1, abs=1e-6)
    assert abs(fit.kappa - 55.467) <= 0.05 * 55.467
    assert abs(fit.kappa - 50.0) <= 0.15 * 50.0


def test_fit_free_offset_mode():
    samples = draws(1.5, 50.0, 20_000, seed=11)
    fixed = fit_truncated_power_law(samples, r0_mode="fixed")
    free = fit_truncated_power_law(samples, r0_mode="free")
    assert free.r0 >= 0.0
    # the extra parameter can only help the likelihood, up to optimizer slack
    assert free.log_likelihood >= fixed.log_likelihood - 1e-3
    assert abs(free.beta - 1.5) <= 0.15


def test_fit_too_few_samples():
    with pytest.raises(TooFewSamples):
        fit_truncated_power_law(np.linspace(1.0, 200.0, 10))


def test_fit_too_few_inside_range():
    # plenty of samples, none inside the window
    with pytest.raises(TooFewSamples):
        fit_truncated_power_law(np.full(1000, 500.0))


@pytest.mark.parametrize("fit_range", [(0.0, 10.0), (5.0, 2.0), (-1.0, 10.0)])
def test_fit_rejects_bad_range(fit_range):
    with pytest.raises(BadArgument):
        fit_truncated_power_law(np.linspace(1.0, 200.0, 200), fit_range=fit_range)


def test_fit_rejects_bad_r0_mode():
    with pytest.raises(BadArgument):
        fit_truncated_power_law(np.linspace(1.0, 200.0, 200), r0_mode="frozen")


def test_fit_beta_stays_inside_search_box():
    fit = fit_truncated_power_law(draws(1.5, 50.0, 1_000, seed=2))
    assert BETA_RANGE[0] <= fit.beta <= BETA_RANGE[1]
    assert fit.kappa > 0.0
