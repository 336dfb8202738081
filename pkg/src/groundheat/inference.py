"""Bayesian estimation machinery: likelihood, priors and the random-walk
Metropolis-Hastings driver.

The likelihood assumes additive, uncorrelated Gaussian measurement errors
with known variance, so for residuals r = Y - T(P) and D measurements

    log L = -(D/2) log(2 pi) - D log(sigma) - r.r / (2 sigma^2).

Two prior families are supported.  Independent truncated Gaussians cover
every component; the truncation constant is component-independent and is
dropped, which leaves acceptance ratios untouched.  A first-difference
smoothness prior covers the surface coefficient vector h with weight gamma,

    log pi(h | gamma) = (n/2) log(gamma) - (gamma/2) |D h|^2 + const,

with gamma itself given a Rayleigh density of scale gamma0 and sampled
jointly with the other unknowns by the same random walk.

Proposals are componentwise uniform: each component moves by at most its
step fraction times a fixed positive scale (prior means in practice), so the
proposal is symmetric and cancels from the acceptance factor
min(1, pi(P*) / pi(P)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .domain import MeasurementSet, ParameterLayout, PhysicalProblem, ReferenceScales
from .forward import ForwardOperator, SolverFailure, SolverSettings

__all__ = [
    "GaussianPrior",
    "SmoothnessPrior",
    "MHConfig",
    "Chain",
    "log_likelihood",
    "log_gaussian_prior",
    "log_smoothness_prior",
    "log_rayleigh",
    "propose",
    "acceptance_probability",
    "run_chain",
    "HeatPosterior",
    "case_ab_posterior",
    "case_c_posterior",
]

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianPrior:
    """Independent Gaussian prior, optionally truncated to positive values."""

    mean: np.ndarray
    std: np.ndarray
    positive: bool = True

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if mean.shape != std.shape:
            raise ValueError("mean and std must have the same length")
        if np.any(std <= 0.0) or not np.all(np.isfinite(std)) or not np.all(
            np.isfinite(mean)
        ):
            raise ValueError("prior standard deviations must be positive and finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def size(self) -> int:
        return int(self.mean.size)


@dataclass(frozen=True)
class SmoothnessPrior:
    """First-difference Gaussian smoothness prior over the surface vector.

    The precision matrix is gamma * D^T D with D the (n-1) x n first-order
    difference matrix; the reference vector is the zero vector, which is
    equivalent to any constant vector because D annihilates constants.
    scale is the Rayleigh scale gamma0 of the hyperprior on gamma.
    """

    n_intervals: int
    scale: float

    def __post_init__(self):
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 2:
            raise ValueError(
                f"the smoothness prior needs at least 2 intervals, got {self.n_intervals!r}"
            )
        if not math.isfinite(self.scale) or self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale!r}")
        object.__setattr__(self, "n_intervals", int(self.n_intervals))

    def difference_matrix(self) -> np.ndarray:
        n = self.n_intervals
        mat = np.zeros((n - 1, n))
        idx = np.arange(n - 1)
        mat[idx, idx] = -1.0
        mat[idx, idx + 1] = 1.0
        return mat


def log_likelihood(measured, predicted, noise_std: float) -> float:
    """Gaussian log-likelihood of predictions against measurements."""
    measured = np.asarray(measured, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if measured.shape != predicted.shape:
        raise ValueError(
            f"shape mismatch: measurements {measured.shape} vs predictions "
            f"{predicted.shape}"
        )
    if not math.isfinite(noise_std) or noise_std <= 0.0:
        raise ValueError(f"noise_std must be positive, got {noise_std!r}")
    residual = (measured - predicted).ravel()
    n = residual.size
    return (
        -0.5 * n * _LOG_2PI
        - n * math.log(noise_std)
        - 0.5 * float(residual @ residual) / noise_std**2
    )


def log_gaussian_prior(values, prior: GaussianPrior) -> float:
    """Log-density up to the fixed truncation constant; -inf when the
    positivity constraint is violated."""
    values = np.asarray(values, dtype=float)
    if values.shape != prior.mean.shape:
        raise ValueError(
            f"expected {prior.mean.shape[0]} components, got shape {values.shape}"
        )
    if prior.positive and np.any(values <= 0.0):
        return -math.inf
    z = (values - prior.mean) / prior.std
    return float(
        -0.5 * prior.size * _LOG_2PI
        - np.sum(np.log(prior.std))
        - 0.5 * (z @ z)
    )


def log_smoothness_prior(h_values, gamma: float, prior: SmoothnessPrior) -> float:
    """Smoothness log-density in (h, gamma), constants dropped."""
    h_values = np.asarray(h_values, dtype=float)
    if h_values.shape != (prior.n_intervals,):
        raise ValueError(
            f"expected {prior.n_intervals} surface values, got shape {h_values.shape}"
        )
    if not math.isfinite(gamma) or gamma <= 0.0:
        return -math.inf
    steps = np.diff(h_values)
    return 0.5 * prior.n_intervals * math.log(gamma) - 0.5 * gamma * float(
        steps @ steps
    )


def log_rayleigh(gamma: float, scale: float) -> float:
    """Log of the Rayleigh density gamma/scale^2 exp(-(gamma/scale)^2 / 2)."""
    if not math.isfinite(scale) or scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    if not math.isfinite(gamma) or gamma <= 0.0:
        return -math.inf
    return math.log(gamma) - 2.0 * math.log(scale) - 0.5 * (gamma / scale) ** 2


@dataclass(frozen=True)
class MHConfig:
    """Random-walk chain settings.

    step_fractions holds the maximum move per component as a fraction of
    that component's proposal scale; a scalar applies to every component.
    """

    n_states: int
    step_fractions: float | np.ndarray = 0.02
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if int(self.n_states) != self.n_states or self.n_states < 1:
            raise ValueError(f"n_states must be a positive integer, got {self.n_states!r}")
        fractions = np.atleast_1d(np.asarray(self.step_fractions, dtype=float))
        if np.any(fractions < 0.0) or not np.all(np.isfinite(fractions)):
            raise ValueError("step fractions must be non-negative and finite")
        if int(self.burn_in) != self.burn_in or not 0 <= self.burn_in < self.n_states:
            raise ValueError(
                f"burn_in must lie in [0, n_states), got {self.burn_in!r}"
            )
        object.__setattr__(self, "n_states", int(self.n_states))
        object.__setattr__(self, "step_fractions", fractions)
        object.__setattr__(self, "burn_in", int(self.burn_in))
        object.__setattr__(self, "seed", int(self.seed))

    def radii(self, scales) -> np.ndarray:
        """Absolute proposal radii: step fraction times scale, per component."""
        scales = np.asarray(scales, dtype=float)
        if np.any(scales <= 0.0) or not np.all(np.isfinite(scales)):
            raise ValueError("proposal scales must be positive and finite")
        fractions = self.step_fractions
        if fractions.size == 1:
            fractions = np.full(scales.size, fractions[0])
        if fractions.shape != scales.shape:
            raise ValueError(
                f"{fractions.size} step fractions for {scales.size} parameters"
            )
        return fractions * scales


@dataclass(frozen=True)
class Chain:
    """Recorded Markov chain.

    Row 0 is the initial state; accepted[k] says whether row k replaced row
    k-1 with a fresh candidate (accepted[0] is always False).  Rejected rows
    repeat their predecessor.
    """

    samples: np.ndarray
    accepted: np.ndarray
    log_posterior: np.ndarray
    seed: int
    parameter_names: tuple[str, ...]

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        accepted = np.asarray(self.accepted, dtype=bool)
        logpost = np.asarray(self.log_posterior, dtype=float)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-d state-by-parameter matrix")
        if accepted.shape != (samples.shape[0],) or logpost.shape != (samples.shape[0],):
            raise ValueError("accepted flags and log-posterior trace must match samples")
        if len(self.parameter_names) != samples.shape[1]:
            raise ValueError("one parameter name per column is required")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "accepted", accepted)
        object.__setattr__(self, "log_posterior", logpost)
        object.__setattr__(self, "parameter_names", tuple(self.parameter_names))

    @property
    def n_states(self) -> int:
        return int(self.samples.shape[0])

    @property
    def n_parameters(self) -> int:
        return int(self.samples.shape[1])

    def trim(self, burn_in: int) -> "Chain":
        """Chain with the first burn_in rows removed."""
        if not 0 <= burn_in < self.n_states:
            raise ValueError(f"burn_in must lie in [0, {self.n_states}), got {burn_in}")
        return Chain(
            self.samples[burn_in:],
            self.accepted[burn_in:],
            self.log_posterior[burn_in:],
            self.seed,
            self.parameter_names,
        )


def propose(values: np.ndarray, radii: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Symmetric uniform step: each component moves by radii * U(-1, 1)."""
    values = np.asarray(values, dtype=float)
    return values + radii * rng.uniform(-1.0, 1.0, size=values.size)


def acceptance_probability(log_post_candidate: float, log_post_current: float) -> float:
    """min(1, exp(delta)) for a symmetric proposal; an infeasible candidate
    (log-posterior -inf) is never accepted."""
    if math.isnan(log_post_candidate) or log_post_candidate == -math.inf:
        return 0.0
    if log_post_current == -math.inf:
        return 1.0
    delta = log_post_candidate - log_post_current
    return 1.0 if delta >= 0.0 else math.exp(delta)


def run_chain(
    config: MHConfig,
    log_posterior: Callable[[np.ndarray], float],
    initial,
    proposal_scales,
    parameter_names: Sequence[str] | None = None,
) -> Chain:
    """Run the random-walk Metropolis-Hastings chain.

    Starting from the initial state, each iteration draws a uniform
    componentwise candidate, evaluates its log-posterior, accepts it with
    probability min(1, exp(delta)) and records the resulting state, flag and
    log-posterior value.  The walk is deterministic given the seed.

    Parameters
    ----------
    config : MHConfig
        Chain length, step fractions, seed and burn-in bookkeeping.
    log_posterior : callable
        Maps a parameter array to a float (may return -inf).
    initial : array-like or ParameterVector
        Starting state; must have a finite log-posterior.
    proposal_scales : array-like
        Positive per-component scales multiplied by the step fractions.
    parameter_names : sequence of str, optional
        Column labels; taken from the initial state's layout when it has
        one, else p1..pN.
    """
    if hasattr(initial, "layout") and hasattr(initial, "values"):
        if parameter_names is None:
            parameter_names = initial.layout.names()
        initial = initial.values
    state = np.array(initial, dtype=float)
    if state.ndim != 1:
        raise ValueError("initial state must be one-dimensional")
    if parameter_names is None:
        parameter_names = tuple(f"p{i + 1}" for i in range(state.size))
    radii = config.radii(proposal_scales)
    if radii.size != state.size:
        raise ValueError(f"{radii.size} proposal radii for {state.size} parameters")

    current_lp = float(log_posterior(state))
    if not math.isfinite(current_lp):
        raise ValueError(
            f"initial state has non-finite log-posterior ({current_lp})"
        )

    n_states = config.n_states
    samples = np.empty((n_states, state.size))
    accepted = np.zeros(n_states, dtype=bool)
    trace = np.empty(n_states)
    samples[0] = state
    trace[0] = current_lp

    rng = np.random.default_rng(config.seed)
    for k in range(1, n_states):
        candidate = propose(state, radii, rng)
        candidate_lp = float(log_posterior(candidate))
        alpha = acceptance_probability(candidate_lp, current_lp)
        if rng.uniform() <= alpha:
            state = candidate
            current_lp = candidate_lp
            accepted[k] = True
        samples[k] = state
        trace[k] = current_lp
    return Chain(samples, accepted, trace, config.seed, tuple(parameter_names))


class HeatPosterior:
    """Log-posterior of slab parameters given temperature measurements.

    Wraps a :class:`~groundheat.forward.ForwardOperator` with the Gaussian
    likelihood and the configured priors.  Evaluation order: positivity of
    every component is checked first (no solve for infeasible points), then
    one forward solve feeds the likelihood, then the active prior terms are
    added.  A solver failure is logged and mapped to -inf so a long chain
    treats it as a rejection instead of aborting.
    """

    def __init__(
        self,
        operator: ForwardOperator,
        measurements: MeasurementSet,
        layout: ParameterLayout,
        gaussian_prior: GaussianPrior | None = None,
        smoothness_prior: SmoothnessPrior | None = None,
    ):
        if layout.n_intervals != operator.n_intervals:
            raise ValueError(
                f"layout has {layout.n_intervals} intervals but the operator "
                f"expects {operator.n_intervals}"
            )
        if layout.with_hyperparameter != (smoothness_prior is not None):
            raise ValueError(
                "the layout carries a hyperparameter exactly when a smoothness "
                "prior is configured"
            )
        if smoothness_prior is not None and smoothness_prior.n_intervals != layout.n_intervals:
            raise ValueError("smoothness prior size does not match the layout")
        if gaussian_prior is not None and gaussian_prior.size not in (2, 2 + layout.n_intervals):
            raise ValueError(
                "the Gaussian prior must cover either the two material "
                "parameters or all non-hyper parameters"
            )
        if measurements.noise_std <= 0.0:
            raise ValueError("measurements need a positive noise_std for the likelihood")
        self.operator = operator
        self.measurements = measurements
        self.layout = layout
        self.gaussian_prior = gaussian_prior
        self.smoothness_prior = smoothness_prior

    def log_posterior(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.layout.size,):
            raise ValueError(
                f"expected {self.layout.size} components, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            return -math.inf
        conductivity, capacity, h_values, gamma = self.layout.unpack(values)
        try:
            predicted = self.operator.predict(conductivity, capacity, h_values)
        except SolverFailure as exc:
            log.warning("forward solve failed, rejecting candidate: %s", exc)
            return -math.inf
        total = log_likelihood(
            self.measurements.temperatures, predicted, self.measurements.noise_std
        )
        if self.gaussian_prior is not None:
            total += log_gaussian_prior(
                values[: self.gaussian_prior.size], self.gaussian_prior
            )
        if self.smoothness_prior is not None:
            total += log_smoothness_prior(h_values, gamma, self.smoothness_prior)
            total += log_rayleigh(gamma, self.smoothness_prior.scale)
        return total

    __call__ = log_posterior


def case_ab_posterior(
    problem: PhysicalProblem,
    refs: ReferenceScales,
    settings: SolverSettings,
    breakpoints,
    measurements: MeasurementSet,
    prior: GaussianPrior,
) -> HeatPosterior:
    """Posterior with truncated Gaussian priors on every parameter and a
    coarse surface partition (the case A/B setup)."""
    breakpoints = np.asarray(breakpoints, dtype=float)
    layout = ParameterLayout(breakpoints.size - 1, with_hyperparameter=False)
    if prior.size != layout.size:
        raise ValueError(
            f"prior covers {prior.size} components but the layout has {layout.size}"
        )
    operator = ForwardOperator(
        problem,
        refs,
        settings,
        breakpoints,
        measurements.sensor_depths,
        measurements.observation_times,
    )
    return HeatPosterior(operator, measurements, layout, gaussian_prior=prior)


def case_c_posterior(
    problem: PhysicalProblem,
    refs: ReferenceScales,
    settings: SolverSettings,
    breakpoints,
    measurements: MeasurementSet,
    material_prior: GaussianPrior,
    smoothness_prior: SmoothnessPrior,
) -> HeatPosterior:
    """Posterior with Gaussian priors on the material parameters and the
    smoothness prior plus Rayleigh hyperprior on a fine surface partition
    (the case C setup)."""
    breakpoints = np.asarray(breakpoints, dtype=float)
    layout = ParameterLayout(breakpoints.size - 1, with_hyperparameter=True)
    if material_prior.size != 2:
        raise ValueError("material_prior must cover exactly (conductivity, capacity)")
    if smoothness_prior.n_intervals != layout.n_intervals:
        raise ValueError(
            f"smoothness prior has {smoothness_prior.n_intervals} intervals, "
            f"the partition has {layout.n_intervals}"
        )
    operator = ForwardOperator(
        problem,
        refs,
        settings,
        breakpoints,
        measurements.sensor_depths,
        measurements.observation_times,
    )
    return HeatPosterior(
        operator,
        measurements,
        layout,
        gaussian_prior=material_prior,
        smoothness_prior=smoothness_prior,
    )
