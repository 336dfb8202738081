from __future__ import annotations

import math

import numpy as np
import pytest

import groundheat as gh
from groundheat import diagnostics as diag


def make_chain(samples, accepted=None, names=None) -> gh.Chain:
    samples = np.atleast_2d(np.asarray(samples, dtype=float).T).T
    n = samples.shape[0]
    if accepted is None:
        accepted = np.zeros(n, dtype=bool)
        accepted[1:] = np.any(samples[1:] != samples[:-1], axis=1)
    if names is None:
        names = tuple(f"p{j + 1}" for j in range(samples.shape[1]))
    return gh.Chain(samples, accepted, np.zeros(n), 0, names)


class TestSummarize:
    def test_constant_chain(self):
        chain = make_chain(np.full(50, 4.2))
        summary = diag.summarize(chain, 10)
        assert summary.means[0] == 4.2
        assert summary.stds[0] == 0.0

    def test_alternating_chain(self):
        chain = make_chain(np.tile([1.0, 3.0], 50))
        summary = diag.summarize(chain, 0)
        assert summary.means[0] == pytest.approx(2.0)

    def test_gaussian_moments(self):
        rng = np.random.default_rng(0)
        x = rng.normal(5.0, 2.0, 100_000)
        summary = diag.summarize(make_chain(x), 0)
        assert abs(summary.means[0] - 5.0) <= 3.0 * 2.0 / math.sqrt(x.size)
        assert abs(summary.stds[0] - 2.0) <= 3.0 * 2.0 / math.sqrt(2.0 * x.size)

    def test_trimming_invariance(self):
        rng = np.random.default_rng(1)
        chain = make_chain(rng.normal(size=(500, 3)))
        direct = diag.summarize(chain, 100)
        trimmed = diag.summarize(chain.trim(100), 0)
        assert np.array_equal(direct.means, trimmed.means)
        assert np.array_equal(direct.stds, trimmed.stds)
        assert direct.acceptance_rate == trimmed.acceptance_rate

    def test_burn_in_bounds(self):
        chain = make_chain(np.arange(10.0))
        with pytest.raises(ValueError, match="burn_in"):
            diag.summarize(chain, 10)


class TestAcceptanceRate:
    def test_all_accepted(self):
        chain = make_chain(np.arange(10.0), accepted=np.ones(10, dtype=bool))
        assert diag.acceptance_rate(chain) == 1.0

    def test_none_accepted(self):
        chain = make_chain(np.full(10, 1.0), accepted=np.zeros(10, dtype=bool))
        assert diag.acceptance_rate(chain) == 0.0

    def test_partial(self):
        accepted = np.array([False, True, False, True, False])
        chain = make_chain(np.array([1.0, 2.0, 2.0, 3.0, 3.0]), accepted=accepted)
        assert diag.acceptance_rate(chain) == 0.5


class TestGeweke:
    def test_constant_chain_is_zero(self):
        assert diag.geweke_relative_difference(np.full(100, 3.0))[0] == 0.0

    def test_two_constant_halves(self):
        a, b = 2.0, 5.0
        x = np.concatenate([np.full(50, a), np.full(50, b)])
        # First 10% lies inside the a-half, last 50% is exactly the b-half.
        value = diag.geweke_relative_difference(x)[0]
        assert value == pytest.approx(abs(a - b) / abs(b), rel=1e-14)

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(2)
        x = rng.normal(10.0, 1.0, 1000)
        base = diag.geweke_relative_difference(x)
        scaled = diag.geweke_relative_difference(137.0 * x)
        assert np.allclose(base, scaled, rtol=1e-12)

    def test_multiparameter(self):
        rng = np.random.default_rng(3)
        x = rng.normal(10.0, 1.0, (1000, 4))
        assert diag.geweke_relative_difference(x).shape == (4,)

    def test_overlapping_segments_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            diag.geweke_relative_difference(np.arange(100.0), 0.6, 0.5)

    def test_bad_fractions_rejected(self):
        with pytest.raises(ValueError, match="fractions"):
            diag.geweke_relative_difference(np.arange(100.0), 0.0, 0.5)


class TestAutocovarianceAndIact:
    def test_lag0_is_variance(self):
        rng = np.random.default_rng(4)
        x = rng.normal(3.0, 1.5, 5000)
        acov = diag.autocovariance(x)
        assert acov[0] == pytest.approx(np.var(x), rel=1e-10)

    def test_iid_iact_is_one(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0.0, 1.0, 100_000)
        acov, tau = diag.autocovariance_and_iact(x)
        assert tau == pytest.approx(1.0, abs=0.1)
        assert acov.shape == (x.size,)

    def test_ar1_iact_matches_analytic(self):
        # AR(1) with coefficient phi has IACT (1 + phi) / (1 - phi) = 3.
        phi = 0.5
        rng = np.random.default_rng(6)
        noise = rng.normal(0.0, 1.0, 100_000)
        x = np.empty_like(noise)
        x[0] = noise[0]
        for t in range(1, noise.size):
            x[t] = phi * x[t - 1] + noise[t]
        tau = diag.integrated_autocorrelation_time(x)
        assert tau == pytest.approx(3.0, rel=0.10)

    def test_affine_invariance(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0.0, 1.0, 20_000)
        y = 5.0 + 2.5 * x
        assert diag.integrated_autocorrelation_time(x) == pytest.approx(
            diag.integrated_autocorrelation_time(y), rel=1e-10
        )

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            diag.integrated_autocorrelation_time(np.full(500, 2.0))

    def test_short_chain_rejected(self):
        with pytest.raises(ValueError, match="100"):
            diag.integrated_autocorrelation_time(np.arange(50.0))


class TestResidualReport:
    def test_perfect_predictions(self):
        y = np.full((2, 5), 300.0)
        report = diag.residual_report(y, y, 0.25)
        assert np.all(report.residuals == 0.0)
        assert report.within_noise_fraction == 1.0
        assert np.all(report.max_absolute == 0.0)

    def test_single_kelvin_offset(self):
        report = diag.residual_report(
            np.array([[300.0]]), np.array([[299.0]]), 0.25
        )
        assert report.residuals[0, 0] == 1.0
        assert report.max_absolute[0] == 1.0
        assert report.max_relative_pct[0] == pytest.approx(100.0 / 300.0)
        assert report.within_noise_fraction == 0.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(8)
        y = 300.0 + rng.normal(0.0, 1.0, (3, 20))
        t = 300.0 + rng.normal(0.0, 1.0, (3, 20))
        forward = diag.residual_report(y, t, 0.25)
        backward = diag.residual_report(t, y, 0.25)
        assert np.array_equal(forward.residuals, -backward.residuals)
        assert np.array_equal(forward.max_absolute, backward.max_absolute)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            diag.residual_report(np.zeros((2, 3)), np.zeros((3, 2)), 0.25)


class TestHistogram:
    def test_constant_chain_single_bin(self):
        edges, counts = diag.histogram(np.full(100, 2.0), bins=7)
        assert counts.sum() == 100
        assert counts.max() == 100

    def test_uniform_grid_equal_counts(self):
        x = np.arange(1000) / 1000.0
        edges, counts = diag.histogram(x, bins=10)
        assert np.all(counts == 100)

    def test_counts_sum_to_samples(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=12345)
        edges, counts = diag.histogram(x)
        assert counts.sum() == x.size
        assert edges.size == counts.size + 1

    def test_default_bin_floor(self):
        rng = np.random.default_rng(10)
        edges, counts = diag.histogram(rng.normal(size=30))
        assert counts.size >= 10

    def test_gaussian_bin_probabilities(self):
        from math import erf, sqrt

        rng = np.random.default_rng(11)
        n = 200_000
        x = rng.normal(0.0, 1.0, n)
        edges, counts = diag.histogram(x, bins=20)

        def cdf(v):
            return 0.5 * (1.0 + erf(v / sqrt(2.0)))

        for b in range(counts.size):
            p = cdf(edges[b + 1]) - cdf(edges[b])
            se = math.sqrt(max(p * (1.0 - p), 1e-12) * n)
            assert abs(counts[b] - p * n) <= 4.0 * se + 1.0

    def test_invalid_bins(self):
        with pytest.raises(ValueError, match="bins"):
            diag.histogram(np.arange(10.0), bins=0)
