"""Chain post-processing: summaries, convergence checks, residual analysis.

The convergence indicator used here is the relative difference of means
between the first 10% and last 50% of the post-burn-in chain (per
parameter), complemented by the autocovariance sequence and the integrated
autocorrelation time (IACT).  The IACT window is picked automatically as
the smallest lag W with W >= 5 * IACT_W, the usual self-consistent rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inference import Chain

__all__ = [
    "PosteriorSummary",
    "ResidualReport",
    "summarize",
    "acceptance_rate",
    "geweke_relative_difference",
    "autocovariance",
    "integrated_autocorrelation_time",
    "autocovariance_and_iact",
    "residual_report",
    "histogram",
]


@dataclass(frozen=True)
class PosteriorSummary:
    """Post-burn-in marginal statistics.

    acceptance_rate counts accepted transitions among the post-burn-in
    states, so summaries are invariant under trimming the chain first.
    """

    parameter_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    acceptance_rate: float
    burn_in: int

    def __post_init__(self):
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError(f"acceptance rate {self.acceptance_rate!r} outside [0, 1]")
        if np.any(np.asarray(self.stds) < 0.0):
            raise ValueError("standard deviations must be non-negative")

    def as_dict(self) -> dict:
        return {
            "burn_in": self.burn_in,
            "acceptance_rate": self.acceptance_rate,
            "parameters": {
                name: {"mean": float(m), "std": float(s)}
                for name, m, s in zip(self.parameter_names, self.means, self.stds)
            },
        }


@dataclass(frozen=True)
class ResidualReport:
    """Measurement-minus-prediction analysis, one row per sensor."""

    residuals: np.ndarray
    max_absolute: np.ndarray
    max_relative_pct: np.ndarray
    within_noise_fraction: float


def summarize(chain: Chain, burn_in: int) -> PosteriorSummary:
    """Sample mean and standard deviation per parameter after burn-in."""
    if not 0 <= burn_in < chain.n_states:
        raise ValueError(f"burn_in must lie in [0, {chain.n_states}), got {burn_in}")
    samples = chain.samples[burn_in:]
    flags = chain.accepted[burn_in + 1 :]
    rate = float(flags.mean()) if flags.size else 0.0
    return PosteriorSummary(
        parameter_names=chain.parameter_names,
        means=samples.mean(axis=0),
        stds=samples.std(axis=0),
        acceptance_rate=rate,
        burn_in=int(burn_in),
    )


def acceptance_rate(chain: Chain) -> float:
    """Accepted transitions divided by the number of transitions."""
    if chain.n_states < 2:
        raise ValueError("acceptance rate needs at least two states")
    return float(chain.accepted[1:].mean())


def geweke_relative_difference(
    samples: np.ndarray, first_frac: float = 0.10, last_frac: float = 0.50
) -> np.ndarray:
    """|mean(first segment) - mean(last segment)| / |mean(last segment)|.

    samples is the post-burn-in portion of the chain, states along axis 0.
    The default segments are the first 10% and the last 50%.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float).T).T
    n = samples.shape[0]
    if not (0.0 < first_frac < 1.0 and 0.0 < last_frac < 1.0):
        raise ValueError("segment fractions must lie in (0, 1)")
    if first_frac + last_frac > 1.0:
        raise ValueError("segments overlap: first_frac + last_frac > 1")
    n_first = int(math.floor(n * first_frac))
    n_last = int(math.floor(n * last_frac))
    if n_first < 1 or n_last < 1:
        raise ValueError(f"chain with {n} states is too short for the segments")
    mean_first = samples[:n_first].mean(axis=0)
    mean_last = samples[n - n_last :].mean(axis=0)
    return np.abs(mean_first - mean_last) / np.abs(mean_last)


def autocovariance(samples: np.ndarray) -> np.ndarray:
    """Autocovariance sequence with biased (1/n) normalization, lags 0..n-1.

    Computed via FFT; lag 0 equals the sample variance up to rounding.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("autocovariance needs a 1-d sequence of length >= 2")
    n = x.size
    centered = x - x.mean()
    size = 1
    while size < 2 * n:
        size <<= 1
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    return acov / n


def integrated_autocorrelation_time(
    samples: np.ndarray, window_factor: float = 5.0
) -> float:
    """IACT = 1 + 2 sum(rho_k), truncated at the smallest window W with
    W >= window_factor * IACT_W."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ValueError(f"IACT needs at least 100 states, got {x.size}")
    acov = autocovariance(x)
    if acov[0] <= 0.0:
        raise ValueError("degenerate chain: zero variance")
    rho = acov / acov[0]
    taus = 1.0 + 2.0 * np.cumsum(rho[1:])
    windows = np.arange(1, x.size)
    reached = windows >= window_factor * taus
    cut = int(np.argmax(reached)) if reached.any() else taus.size - 1
    return float(taus[cut])


def autocovariance_and_iact(samples: np.ndarray):
    """Autocovariance sequence and integrated autocorrelation time."""
    return autocovariance(samples), integrated_autocorrelation_time(samples)


def residual_report(measured, predicted, noise_std: float) -> ResidualReport:
    """Residuals r = measured - predicted with per-sensor extremes.

    Matrices are (n_sensors, n_times); the relative discrepancy is percent
    of the measured value on the kelvin scale.  within_noise_fraction is the
    overall share of residuals with |r| <= noise_std.
    """
    measured = np.atleast_2d(np.asarray(measured, dtype=float))
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float))
    if measured.shape != predicted.shape:
        raise ValueError(
            f"shape mismatch: measurements {measured.shape} vs predictions "
            f"{predicted.shape}"
        )
    if noise_std < 0.0:
        raise ValueError("noise_std must be non-negative")
    residuals = measured - predicted
    magnitude = np.abs(residuals)
    return ResidualReport(
        residuals=residuals,
        max_absolute=magnitude.max(axis=1),
        max_relative_pct=100.0 * (magnitude / np.abs(measured)).max(axis=1),
        within_noise_fraction=float((magnitude <= noise_std).mean()),
    )


def histogram(samples: np.ndarray, bins: int | None = None):
    """Bin edges and counts for one parameter's post-burn-in samples.

    bins=None applies the Freedman-Diaconis rule with a floor of 10 bins.
    Counts always sum to the number of samples.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("histogram needs a non-empty 1-d sequence")
    if bins is None:
        if np.ptp(x) == 0.0:
            edges = np.linspace(x[0] - 0.5, x[0] + 0.5, 11)
        else:
            edges = np.histogram_bin_edges(x, bins="fd")
            if edges.size - 1 < 10:
                edges = np.histogram_bin_edges(x, bins=10)
    else:
        if int(bins) != bins or bins < 1:
            raise ValueError(f"bins must be a positive integer, got {bins!r}")
        edges = int(bins)
    counts, edges = np.histogram(x, bins=edges)
    return edges, counts
