"""Finite-difference sensitivity coefficients of predicted temperatures.

Derivatives of the sensor temperatures with respect to each unknown are
approximated with central differences, stepping each parameter by 1% of its
value (two forward solves per parameter).  The reduced variant multiplies by
the parameter value so coefficients with different units become comparable
for identifiability screening.  These are diagnostics only; the sampler
never consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import MeasurementSet, ParameterVector, PhysicalProblem, ReferenceScales
from .forward import ForwardOperator, SolverFailure, SolverSettings

__all__ = [
    "SensitivityMatrix",
    "central_difference_sensitivities",
    "sensitivities",
    "RELATIVE_STEP",
]

# Parameter step as a fraction of the parameter value.
RELATIVE_STEP = 1e-2


@dataclass(frozen=True)
class SensitivityMatrix:
    """Sensitivities indexed as (sensor, parameter, observation time).

    Entries are kelvin per parameter unit, or kelvin when reduced.  steps
    records the absolute perturbation used for each parameter.
    """

    values: np.ndarray
    steps: np.ndarray
    parameter_names: tuple[str, ...]
    sensor_depths: np.ndarray
    observation_times: np.ndarray
    reduced: bool

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        steps = np.asarray(self.steps, dtype=float)
        if values.ndim != 3:
            raise ValueError("values must be (sensor, parameter, time)")
        if steps.shape != (values.shape[1],):
            raise ValueError("one step size per parameter is required")
        if np.any(steps <= 0.0):
            raise ValueError("step sizes must be positive")
        if not np.all(np.isfinite(values)):
            raise ValueError("sensitivities contain non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "parameter_names", tuple(self.parameter_names))


def central_difference_sensitivities(
    predict: Callable[[np.ndarray], np.ndarray],
    values: np.ndarray,
    rel_step: float = RELATIVE_STEP,
    reduced: bool = False,
):
    """Central differences of an arbitrary prediction map.

    predict takes the full parameter array and returns an
    (n_sensors, n_times) matrix.  Returns the (sensor, parameter, time)
    array and the absolute steps used.  Exact for affine maps up to
    rounding.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0):
        raise ValueError("all parameter values must be positive")
    steps = rel_step * values
    columns = []
    for j in range(values.size):
        shifted = values.copy()
        shifted[j] = values[j] + steps[j]
        upper = np.asarray(predict(shifted), dtype=float)
        shifted[j] = values[j] - steps[j]
        lower = np.asarray(predict(shifted), dtype=float)
        derivative = (upper - lower) / (2.0 * steps[j])
        if reduced:
            derivative = derivative * values[j]
        columns.append(derivative)
    return np.stack(columns, axis=1), steps


def sensitivities(
    problem: PhysicalProblem,
    refs: ReferenceScales,
    settings: SolverSettings,
    params: ParameterVector,
    sensors: MeasurementSet,
    breakpoints,
    reduced: bool = True,
    rel_step: float = RELATIVE_STEP,
) -> SensitivityMatrix:
    """Sensitivity coefficients at the given parameter point.

    breakpoints defines the surface coefficient partition matching the
    parameter layout.  When the layout carries a smoothing hyperparameter
    its column is exactly zero without running the solver, since the
    forward model does not depend on it.
    """
    operator = ForwardOperator(
        problem,
        refs,
        settings,
        breakpoints,
        sensors.sensor_depths,
        sensors.observation_times,
    )
    layout = params.layout
    if operator.n_intervals != layout.n_intervals:
        raise ValueError(
            f"partition has {operator.n_intervals} intervals but the layout "
            f"expects {layout.n_intervals}"
        )
    model_size = 2 + layout.n_intervals

    def predict(vec: np.ndarray) -> np.ndarray:
        full = np.concatenate([vec, params.values[model_size:]])
        conductivity, capacity, h_values, _ = layout.unpack(full)
        try:
            return operator.predict(conductivity, capacity, h_values)
        except SolverFailure as exc:
            bad = int(np.argmax(np.abs(vec - params.values[:model_size])))
            raise SolverFailure(
                f"forward solve failed while perturbing parameter "
                f"{layout.names()[bad]}: {exc}"
            ) from exc

    model_values = params.values[:model_size]
    matrix, steps = central_difference_sensitivities(
        predict, model_values, rel_step=rel_step, reduced=reduced
    )
    if layout.with_hyperparameter:
        shape = (matrix.shape[0], 1, matrix.shape[2])
        matrix = np.concatenate([matrix, np.zeros(shape)], axis=1)
        steps = np.append(steps, rel_step * params.values[-1])
    return SensitivityMatrix(
        values=matrix,
        steps=steps,
        parameter_names=layout.names(),
        sensor_depths=sensors.sensor_depths,
        observation_times=sensors.observation_times,
        reduced=reduced,
    )
