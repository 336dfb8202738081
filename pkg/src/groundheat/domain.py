"""Core data types for the ground slab heat transfer problem.

Everything is SI internally: seconds, metres, kelvin, watts, joules.
Conversions from hours or degrees Celsius happen only when files are read
(see :mod:`groundheat.io`).  All types here are immutable after construction
and safe to share between concurrent workers; array fields are locked
read-only copies of the caller's data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialParams",
    "TimeSeries",
    "PiecewiseLinearProfile",
    "PhysicalProblem",
    "ReferenceScales",
    "SurfaceCoefficient",
    "MeasurementSet",
    "ParameterLayout",
    "ParameterVector",
    "evaluate_surface_coefficient",
    "build_uniform_partition",
]


def _frozen_array(values, name: str, *, ndim: int = 1) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def _require_positive(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class MaterialParams:
    """Homogeneous slab material.

    conductivity is in W/(m K); heat_capacity is the volumetric heat
    capacity in J/(m^3 K), i.e. density times specific heat as a single
    quantity.
    """

    conductivity: float
    heat_capacity: float

    def __post_init__(self):
        _require_positive(self.conductivity, "conductivity")
        _require_positive(self.heat_capacity, "heat_capacity")

    @property
    def diffusivity(self) -> float:
        """Thermal diffusivity in m^2/s."""
        return self.conductivity / self.heat_capacity


@dataclass(frozen=True)
class TimeSeries:
    """Sampled signal over time: air temperature, deep temperature,
    net radiation flux or wind velocity, depending on context.

    Times are in seconds and strictly increasing; at least two samples.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times, "times")
        values = _frozen_array(self.values, "values")
        if times.size < 2:
            raise ValueError(f"a series needs at least 2 samples, got {times.size}")
        if times.size != values.size:
            raise ValueError(
                f"times and values length mismatch: {times.size} vs {values.size}"
            )
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def covers(self, t_begin: float, t_end: float) -> bool:
        return self.start <= t_begin and self.end >= t_end


@dataclass(frozen=True)
class PiecewiseLinearProfile:
    """Piecewise-linear function of depth, constant beyond the outermost nodes."""

    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pos = _frozen_array(self.positions, "positions")
        val = _frozen_array(self.values, "values")
        if pos.size < 2:
            raise ValueError("a profile needs at least 2 nodes")
        if pos.size != val.size:
            raise ValueError("positions and values length mismatch")
        if np.any(np.diff(pos) <= 0.0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)

    def __call__(self, x):
        return np.interp(x, self.positions, self.values)


@dataclass(frozen=True)
class PhysicalProblem:
    """Full statement of the forward problem: geometry, material, boundary
    and initial data for one slab over one time window.

    Boundary series must cover [0, final_time].  net_radiation is the net
    flux absorbed at the surface in W/m^2; air_temperature drives the
    convective exchange and deep_temperature pins the bottom of the slab.
    """

    depth: float
    final_time: float
    material: MaterialParams
    air_temperature: TimeSeries
    net_radiation: TimeSeries
    deep_temperature: TimeSeries
    initial_profile: PiecewiseLinearProfile

    def __post_init__(self):
        _require_positive(self.depth, "depth")
        _require_positive(self.final_time, "final_time")
        for name in ("air_temperature", "net_radiation", "deep_temperature"):
            series: TimeSeries = getattr(self, name)
            if not series.covers(0.0, self.final_time):
                raise ValueError(
                    f"{name} spans [{series.start}, {series.end}] s and does not "
                    f"cover [0, {self.final_time}] s"
                )


@dataclass(frozen=True)
class ReferenceScales:
    """Scales used to nondimensionalize the problem.

    The Fourier and Biot numbers are derived on demand so they can never go
    stale with respect to the stored scales.
    """

    time: float = 3600.0
    temperature: float = 300.0
    conductivity: float = 2.27
    heat_capacity: float = 2.1e6
    surface_coefficient: float = 10.0

    def __post_init__(self):
        for name in (
            "time",
            "temperature",
            "conductivity",
            "heat_capacity",
            "surface_coefficient",
        ):
            _require_positive(getattr(self, name), name)

    def fourier_number(self, depth: float) -> float:
        """Fo = k_ref t_ref / (C_ref L^2)."""
        _require_positive(depth, "depth")
        return self.conductivity * self.time / (self.heat_capacity * depth**2)

    def biot_number(self, depth: float) -> float:
        """Bi = h_ref L / k_ref."""
        _require_positive(depth, "depth")
        return self.surface_coefficient * depth / self.conductivity

    def radiation_scale(self, depth: float) -> float:
        """Divisor turning a W/m^2 flux into its dimensionless counterpart."""
        _require_positive(depth, "depth")
        return self.conductivity * self.temperature / depth


@dataclass(frozen=True)
class SurfaceCoefficient:
    """Piecewise-constant surface heat transfer coefficient h(t).

    breakpoints has n_intervals + 1 entries starting at exactly 0 s; the
    coefficient takes values[i] on [breakpoints[i], breakpoints[i+1]), with
    the final interval closed at its right end so h is single-valued.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _frozen_array(self.breakpoints, "breakpoints")
        val = _frozen_array(self.values, "values")
        if bp.size < 2:
            raise ValueError("breakpoints must contain at least 2 entries")
        if val.size != bp.size - 1:
            raise ValueError(
                f"expected {bp.size - 1} interval values, got {val.size}"
            )
        if bp[0] != 0.0:
            raise ValueError(f"breakpoints must start at 0, got {bp[0]!r}")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(val <= 0.0):
            raise ValueError("surface coefficient values must be positive")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", val)

    @property
    def n_intervals(self) -> int:
        return int(self.values.size)

    @property
    def final_time(self) -> float:
        return float(self.breakpoints[-1])

    def interval_index(self, t) -> np.ndarray:
        """Index of the interval containing each time, clipping t == final_time
        into the last interval.  Callers validate the range."""
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(idx, 0, self.n_intervals - 1)

    def value_at(self, t: float) -> float:
        return evaluate_surface_coefficient(self, t)

    def values_at(self, times) -> np.ndarray:
        """Vectorized lookup for times already known to lie in [0, final_time]."""
        return self.values[self.interval_index(np.asarray(times, dtype=float))]

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])


def evaluate_surface_coefficient(coeff: SurfaceCoefficient, t: float) -> float:
    """Value of the piecewise-constant coefficient at time t in [0, final_time]."""
    t = float(t)
    if not math.isfinite(t) or t < 0.0 or t > coeff.final_time:
        raise ValueError(
            f"time {t!r} outside the coefficient's span [0, {coeff.final_time}]"
        )
    return float(coeff.values[int(coeff.interval_index(t))])


def build_uniform_partition(final_time: float, n_intervals: int) -> np.ndarray:
    """Equally spaced breakpoints over [0, final_time]."""
    _require_positive(final_time, "final_time")
    if int(n_intervals) != n_intervals or n_intervals < 1:
        raise ValueError(f"n_intervals must be a positive integer, got {n_intervals!r}")
    return np.linspace(0.0, final_time, int(n_intervals) + 1)


@dataclass(frozen=True)
class MeasurementSet:
    """Transient temperature measurements at several depths.

    temperatures is an (n_sensors, n_times) matrix in kelvin.  noise_std is
    the known measurement standard deviation; the noise covariance is
    noise_std^2 times the identity.  A zero noise_std denotes noise-free
    synthetic data and is rejected by the likelihood, not here.
    """

    sensor_depths: np.ndarray
    observation_times: np.ndarray
    temperatures: np.ndarray
    noise_std: float

    def __post_init__(self):
        depths = _frozen_array(self.sensor_depths, "sensor_depths")
        times = _frozen_array(self.observation_times, "observation_times")
        temps = _frozen_array(self.temperatures, "temperatures", ndim=2)
        if depths.size < 1:
            raise ValueError("at least one sensor depth is required")
        if np.any(depths < 0.0):
            raise ValueError("sensor depths must be non-negative")
        if np.any(np.diff(depths) <= 0.0):
            raise ValueError("sensor depths must be strictly increasing (and distinct)")
        if times.size < 1 or np.any(np.diff(times) <= 0.0):
            raise ValueError("observation times must be strictly increasing")
        if np.any(times < 0.0):
            raise ValueError("observation times must be non-negative")
        if temps.shape != (depths.size, times.size):
            raise ValueError(
                f"temperatures must have shape {(depths.size, times.size)}, "
                f"got {temps.shape}"
            )
        if not math.isfinite(self.noise_std) or self.noise_std < 0.0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std!r}")
        object.__setattr__(self, "sensor_depths", depths)
        object.__setattr__(self, "observation_times", times)
        object.__setattr__(self, "temperatures", temps)
        object.__setattr__(self, "noise_std", float(self.noise_std))

    @property
    def n_sensors(self) -> int:
        return int(self.sensor_depths.size)

    @property
    def n_times(self) -> int:
        return int(self.observation_times.size)

    @property
    def n_measurements(self) -> int:
        return self.n_sensors * self.n_times


@dataclass(frozen=True)
class ParameterLayout:
    """Maps positions in a flat parameter vector to their roles.

    Order is (conductivity, heat capacity, h_1 ... h_n[, gamma]); the
    trailing smoothing weight gamma is present only when the smoothness
    prior is active.
    """

    n_intervals: int
    with_hyperparameter: bool = False

    def __post_init__(self):
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 1:
            raise ValueError(
                f"n_intervals must be a positive integer, got {self.n_intervals!r}"
            )
        object.__setattr__(self, "n_intervals", int(self.n_intervals))

    @property
    def size(self) -> int:
        return 2 + self.n_intervals + (1 if self.with_hyperparameter else 0)

    def names(self) -> tuple[str, ...]:
        names = ["kappa", "C"]
        names += [f"h_{i + 1}" for i in range(self.n_intervals)]
        if self.with_hyperparameter:
            names.append("gamma")
        return tuple(names)

    def pack(self, conductivity, heat_capacity, surface_values, hyperparameter=None):
        surface_values = np.asarray(surface_values, dtype=float)
        if surface_values.shape != (self.n_intervals,):
            raise ValueError(
                f"expected {self.n_intervals} surface values, got shape "
                f"{surface_values.shape}"
            )
        if self.with_hyperparameter:
            if hyperparameter is None:
                raise ValueError("layout includes a hyperparameter but none was given")
            tail = [float(hyperparameter)]
        else:
            if hyperparameter is not None:
                raise ValueError("layout has no hyperparameter slot")
            tail = []
        return np.concatenate(
            [[float(conductivity), float(heat_capacity)], surface_values, tail]
        )

    def unpack(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise ValueError(f"expected {self.size} components, got shape {values.shape}")
        h = values[2 : 2 + self.n_intervals]
        gamma = float(values[-1]) if self.with_hyperparameter else None
        return float(values[0]), float(values[1]), h, gamma


@dataclass(frozen=True)
class ParameterVector:
    """Validated point in parameter space (all components positive)."""

    values: np.ndarray
    layout: ParameterLayout

    def __post_init__(self):
        values = _frozen_array(self.values, "values")
        if values.shape != (self.layout.size,):
            raise ValueError(
                f"layout expects {self.layout.size} components, got {values.shape}"
            )
        if np.any(values <= 0.0):
            raise ValueError("all parameter components must be positive")
        object.__setattr__(self, "values", values)

    @classmethod
    def pack(cls, layout, conductivity, heat_capacity, surface_values, hyperparameter=None):
        return cls(
            layout.pack(conductivity, heat_capacity, surface_values, hyperparameter),
            layout,
        )

    def unpack(self):
        return self.layout.unpack(self.values)

    @property
    def conductivity(self) -> float:
        return float(self.values[0])

    @property
    def heat_capacity(self) -> float:
        return float(self.values[1])

    @property
    def surface_values(self) -> np.ndarray:
        return self.values[2 : 2 + self.layout.n_intervals]

    @property
    def hyperparameter(self) -> float | None:
        return float(self.values[-1]) if self.layout.with_hyperparameter else None
