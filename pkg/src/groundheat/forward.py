"""Dimensionless transform and DuFort-Frankel integration of the slab.

The heat equation C dT/dt = d/dx(kappa dT/dx) on [0, L] is scaled with a set
of :class:`~groundheat.domain.ReferenceScales` and integrated with the
three-level DuFort-Frankel scheme: the classic explicit centered step with
the central node at level n replaced by the average of levels n-1 and n+1.
The scheme is unconditionally stable but only consistent when dt/dx -> 0,
so the default step keeps the diffusion number Fo dt*/dx*^2 at or below 1/2.

Boundary conditions: a flux balance at the surface (x = 0),

    kappa dT/dx = h(t) (T - T_air(t)) - q_net(t),

discretized with a first-order one-sided difference and solved for the
surface node at every level, and a prescribed temperature T_deep(t) at
x = L.  The first time level is bootstrapped with forward-Euler substeps,
enough of them to respect the explicit stability limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .domain import (
    MeasurementSet,
    PhysicalProblem,
    PiecewiseLinearProfile,
    ReferenceScales,
    SurfaceCoefficient,
    TimeSeries,
)

__all__ = [
    "SolverSettings",
    "DimensionlessProblem",
    "TemperatureField",
    "SolverFailure",
    "nondimensionalize",
    "solve_forward",
    "predict_at_sensors",
    "default_settings",
    "ForwardOperator",
]

# Explicit diffusion-number ceiling used for the default time step and for
# sizing the forward-Euler bootstrap.
STABILITY_LIMIT = 0.5


class SolverFailure(RuntimeError):
    """Raised when the integration produces a non-finite temperature."""

    def __init__(self, message: str, node: int | None = None, level: int | None = None):
        super().__init__(message)
        self.node = node
        self.level = level


@dataclass(frozen=True)
class SolverSettings:
    """Grid resolution and first-step rule for the integrator.

    nodes is the total node count J+1 over [0, L].  bootstrap_substeps
    fixes the number of forward-Euler substeps taken to reach the first
    time level; None picks the smallest stable count automatically.
    """

    nodes: int = 101
    time_step: float = 60.0
    bootstrap_substeps: int | None = None

    def __post_init__(self):
        if int(self.nodes) != self.nodes or self.nodes < 4:
            raise ValueError(f"nodes must be an integer >= 4, got {self.nodes!r}")
        if not math.isfinite(self.time_step) or self.time_step <= 0.0:
            raise ValueError(f"time_step must be positive, got {self.time_step!r}")
        if self.bootstrap_substeps is not None and (
            int(self.bootstrap_substeps) != self.bootstrap_substeps
            or self.bootstrap_substeps < 1
        ):
            raise ValueError(
                f"bootstrap_substeps must be a positive integer or None, "
                f"got {self.bootstrap_substeps!r}"
            )
        object.__setattr__(self, "nodes", int(self.nodes))

    def level_count(self, final_time: float) -> int:
        """Number of time steps; time_step must divide final_time to 1e-6."""
        ratio = final_time / self.time_step
        steps = round(ratio)
        if steps < 1 or abs(ratio - steps) > 1e-6 * max(1.0, steps):
            raise ValueError(
                f"time_step {self.time_step} s does not divide the final time "
                f"{final_time} s (ratio {ratio})"
            )
        return steps


@dataclass(frozen=True)
class DimensionlessProblem:
    """Scaled problem ready for integration.

    conductivity and heat_capacity are the material values divided by their
    reference scales; fourier and biot are the usual dimensionless groups.
    Series carry dimensionless times and values; the initial profile maps
    x/L to T/T_ref.  The originating scales and slab depth are kept so the
    solution can be redimensionalized.
    """

    conductivity: float
    heat_capacity: float
    fourier: float
    biot: float
    horizon: float
    air: TimeSeries
    deep: TimeSeries
    radiation: TimeSeries
    surface: SurfaceCoefficient
    initial: PiecewiseLinearProfile
    scales: ReferenceScales
    depth: float

    def __post_init__(self):
        for name in ("conductivity", "heat_capacity", "fourier", "biot", "horizon"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        for name in ("air", "deep", "radiation"):
            series: TimeSeries = getattr(self, name)
            if not series.covers(0.0, self.horizon):
                raise ValueError(f"{name} series does not cover [0, {self.horizon}]")


@dataclass(frozen=True)
class TemperatureField:
    """Nodal solution: positions in m, time levels in s, temperatures in K,
    laid out as (n_nodes, n_levels) with the initial profile in column 0."""

    positions: np.ndarray
    times: np.ndarray
    temperatures: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        times = np.asarray(self.times, dtype=float)
        temps = np.asarray(self.temperatures, dtype=float)
        if temps.shape != (pos.size, times.size):
            raise ValueError(
                f"temperatures must have shape {(pos.size, times.size)}, got {temps.shape}"
            )
        if not np.all(np.isfinite(temps)):
            raise ValueError("temperature field contains non-finite values")
        for arr, name in ((pos, "positions"), (times, "times")):
            if np.any(np.diff(arr) <= 0.0):
                raise ValueError(f"{name} must be strictly increasing")
        arr_pos, arr_times, arr_temps = pos.copy(), times.copy(), temps.copy()
        for arr in (arr_pos, arr_times, arr_temps):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", arr_pos)
        object.__setattr__(self, "times", arr_times)
        object.__setattr__(self, "temperatures", arr_temps)


def nondimensionalize(
    problem: PhysicalProblem,
    refs: ReferenceScales,
    surface: SurfaceCoefficient,
) -> DimensionlessProblem:
    """Scale the problem with the given references.

    The surface coefficient partition must span exactly [0, final_time].
    """
    if abs(surface.final_time - problem.final_time) > 1e-9 * problem.final_time:
        raise ValueError(
            f"surface coefficient spans [0, {surface.final_time}] s but the "
            f"problem runs to {problem.final_time} s"
        )
    t_ref = refs.time
    temp_ref = refs.temperature
    q_scale = refs.radiation_scale(problem.depth)
    return DimensionlessProblem(
        conductivity=problem.material.conductivity / refs.conductivity,
        heat_capacity=problem.material.heat_capacity / refs.heat_capacity,
        fourier=refs.fourier_number(problem.depth),
        biot=refs.biot_number(problem.depth),
        horizon=problem.final_time / t_ref,
        air=TimeSeries(
            problem.air_temperature.times / t_ref,
            problem.air_temperature.values / temp_ref,
        ),
        deep=TimeSeries(
            problem.deep_temperature.times / t_ref,
            problem.deep_temperature.values / temp_ref,
        ),
        radiation=TimeSeries(
            problem.net_radiation.times / t_ref,
            problem.net_radiation.values / q_scale,
        ),
        surface=SurfaceCoefficient(
            surface.breakpoints / t_ref,
            surface.values / refs.surface_coefficient,
        ),
        initial=PiecewiseLinearProfile(
            problem.initial_profile.positions / problem.depth,
            problem.initial_profile.values / temp_ref,
        ),
        scales=refs,
        depth=problem.depth,
    )


def default_settings(
    problem: PhysicalProblem, refs: ReferenceScales, nodes: int = 101
) -> SolverSettings:
    """Settings with the largest time step keeping Fo dt*/dx*^2 <= 1/2.

    For realistic slabs this yields a very fine step; estimation pipelines
    usually configure a coarser one explicitly and rely on the scheme's
    unconditional stability plus the substepped bootstrap.
    """
    dx = 1.0 / (nodes - 1)
    dt_max = STABILITY_LIMIT * dx**2 / refs.fourier_number(problem.depth) * refs.time
    steps = max(1, math.ceil(problem.final_time / dt_max))
    return SolverSettings(nodes=nodes, time_step=problem.final_time / steps)


@njit(cache=True, nogil=True)
def _integrate_kernel(
    u0,
    lam,
    cond,
    dx,
    biot,
    u_air,
    u_deep,
    q_star,
    h_star,
    boot_air,
    boot_deep,
    boot_q,
    boot_h,
):
    # Level-major layout (n_levels, n_nodes) keeps each update contiguous.
    n_nodes = u0.shape[0]
    n_levels = u_air.shape[0]
    field = np.empty((n_levels, n_nodes))
    for j in range(n_nodes):
        field[0, j] = u0[j]

    # Forward-Euler substeps to the first stored level.
    m = boot_air.shape[0] - 1
    lam_sub = lam / m
    prev = u0.copy()
    work = np.empty(n_nodes)
    for s in range(1, m + 1):
        for j in range(1, n_nodes - 1):
            work[j] = prev[j] + lam_sub * (prev[j + 1] - 2.0 * prev[j] + prev[j - 1])
        work[n_nodes - 1] = boot_deep[s]
        hb = biot * boot_h[s]
        work[0] = (cond * work[1] / dx + hb * boot_air[s] + boot_q[s]) / (
            cond / dx + hb
        )
        prev, work = work, prev
    for j in range(n_nodes):
        field[1, j] = prev[j]

    # Three-level leapfrog for the remaining levels.
    denom = 1.0 + 2.0 * lam
    c_old = (1.0 - 2.0 * lam) / denom
    c_nbr = 2.0 * lam / denom
    for n in range(2, n_levels):
        for j in range(1, n_nodes - 1):
            field[n, j] = c_old * field[n - 2, j] + c_nbr * (
                field[n - 1, j + 1] + field[n - 1, j - 1]
            )
        field[n, n_nodes - 1] = u_deep[n]
        hb = biot * h_star[n]
        field[n, 0] = (cond * field[n, 1] / dx + hb * u_air[n] + q_star[n]) / (
            cond / dx + hb
        )
    return field


def _integrate(dimless: DimensionlessProblem, settings: SolverSettings) -> np.ndarray:
    """Run the kernel; returns the dimensionless field as (n_levels, n_nodes)."""
    final_time = dimless.horizon * dimless.scales.time
    steps = settings.level_count(final_time)
    dx = 1.0 / (settings.nodes - 1)
    dt_star = settings.time_step / dimless.scales.time
    lam = (
        dimless.fourier
        * dimless.conductivity
        / dimless.heat_capacity
        * dt_star
        / dx**2
    )

    level_times = np.arange(steps + 1) * dt_star
    u_air = np.interp(level_times, dimless.air.times, dimless.air.values)
    u_deep = np.interp(level_times, dimless.deep.times, dimless.deep.values)
    q_star = np.interp(level_times, dimless.radiation.times, dimless.radiation.values)
    h_star = dimless.surface.values_at(np.minimum(level_times, dimless.horizon))

    substeps = settings.bootstrap_substeps
    if substeps is None:
        substeps = max(1, math.ceil(lam / STABILITY_LIMIT - 1e-12))
    boot_times = np.linspace(0.0, dt_star, substeps + 1)
    boot_air = np.interp(boot_times, dimless.air.times, dimless.air.values)
    boot_deep = np.interp(boot_times, dimless.deep.times, dimless.deep.values)
    boot_q = np.interp(boot_times, dimless.radiation.times, dimless.radiation.values)
    boot_h = dimless.surface.values_at(np.minimum(boot_times, dimless.horizon))

    x_nodes = np.linspace(0.0, 1.0, settings.nodes)
    u0 = np.asarray(dimless.initial(x_nodes), dtype=float)

    return _integrate_kernel(
        u0,
        lam,
        dimless.conductivity,
        dx,
        dimless.biot,
        u_air,
        u_deep,
        q_star,
        h_star,
        boot_air,
        boot_deep,
        boot_q,
        boot_h,
    )


def solve_forward(
    dimless: DimensionlessProblem, settings: SolverSettings
) -> TemperatureField:
    """Integrate and return the redimensionalized nodal field.

    Raises
    ------
    SolverFailure
        If any nodal value comes out non-finite; the exception carries the
        offending node and time level indices.
    """
    field = _integrate(dimless, settings)
    if not np.all(np.isfinite(field)):
        level, node = np.argwhere(~np.isfinite(field))[0]
        raise SolverFailure(
            f"non-finite temperature at node {node}, time level {level}",
            node=int(node),
            level=int(level),
        )
    n_levels = field.shape[0]
    return TemperatureField(
        positions=np.linspace(0.0, dimless.depth, settings.nodes),
        times=np.arange(n_levels) * settings.time_step,
        temperatures=np.ascontiguousarray(field.T) * dimless.scales.temperature,
    )


def _gather_weights(grid: np.ndarray, points: np.ndarray, name: str):
    """Lower indices and fractional offsets of points on a sorted grid.

    Points that coincide with grid nodes get an exact 0 or 1 weight so that
    interpolation reproduces nodal values bit for bit.
    """
    points = np.asarray(points, dtype=float)
    if np.any(points < grid[0]) or np.any(points > grid[-1]):
        raise ValueError(
            f"{name} outside the covered range [{grid[0]}, {grid[-1]}]"
        )
    idx = np.clip(np.searchsorted(grid, points, side="right") - 1, 0, grid.size - 2)
    weight = (points - grid[idx]) / (grid[idx + 1] - grid[idx])
    return idx, weight


def _bilinear(values: np.ndarray, ix, wx, it, wt) -> np.ndarray:
    """Bilinear interpolation of values[(node, level)] onto sensor x times."""
    ix = ix[:, None]
    wx = wx[:, None]
    it = it[None, :]
    wt = wt[None, :]
    low = (1.0 - wt) * values[ix, it] + wt * values[ix, it + 1]
    high = (1.0 - wt) * values[ix + 1, it] + wt * values[ix + 1, it + 1]
    return (1.0 - wx) * low + wx * high


def predict_at_sensors(
    field: TemperatureField, sensors: MeasurementSet
) -> np.ndarray:
    """Temperatures at sensor depths and observation times, bilinearly
    interpolated from the nodal field; (n_sensors, n_times) in kelvin."""
    ix, wx = _gather_weights(field.positions, sensors.sensor_depths, "sensor depth")
    it, wt = _gather_weights(field.times, sensors.observation_times, "observation time")
    return _bilinear(field.temperatures, ix, wx, it, wt)


class ForwardOperator:
    """Precompiled map from (conductivity, capacity, h values) to sensor
    temperatures for a fixed problem, grid, partition and observation plan.

    Boundary data interpolation onto solver levels, the initial profile and
    the sensor gather weights do not depend on the sampled parameters, so a
    single instance amortizes them across the many forward solves of an
    MCMC chain or a sensitivity study.  Instances are immutable after
    construction and safe to share between threads.
    """

    def __init__(
        self,
        problem: PhysicalProblem,
        refs: ReferenceScales,
        settings: SolverSettings,
        breakpoints: np.ndarray,
        sensor_depths: np.ndarray,
        observation_times: np.ndarray,
    ):
        breakpoints = np.asarray(breakpoints, dtype=float)
        template = SurfaceCoefficient(breakpoints, np.ones(breakpoints.size - 1))
        self.problem = problem
        self.refs = refs
        self.settings = settings
        self.breakpoints = breakpoints
        self._dimless = nondimensionalize(problem, refs, template)

        steps = settings.level_count(problem.final_time)
        self._dt_star = settings.time_step / refs.time
        self._dx = 1.0 / (settings.nodes - 1)
        level_times = np.arange(steps + 1) * self._dt_star
        dl = self._dimless
        self._u_air = np.interp(level_times, dl.air.times, dl.air.values)
        self._u_deep = np.interp(level_times, dl.deep.times, dl.deep.values)
        self._q_star = np.interp(level_times, dl.radiation.times, dl.radiation.values)
        self._h_index = dl.surface.interval_index(
            np.minimum(level_times, dl.horizon)
        )
        x_nodes = np.linspace(0.0, 1.0, settings.nodes)
        self._u0 = np.asarray(dl.initial(x_nodes), dtype=float)

        times_s = np.arange(steps + 1) * settings.time_step
        positions_s = np.linspace(0.0, problem.depth, settings.nodes)
        self._ix, self._wx = _gather_weights(
            positions_s, np.asarray(sensor_depths, dtype=float), "sensor depth"
        )
        self._it, self._wt = _gather_weights(
            times_s, np.asarray(observation_times, dtype=float), "observation time"
        )
        self.level_times = times_s
        self.sensor_depths = np.asarray(sensor_depths, dtype=float)
        self.observation_times = np.asarray(observation_times, dtype=float)

    @property
    def n_intervals(self) -> int:
        return self.breakpoints.size - 1

    def _run(self, conductivity: float, heat_capacity: float, h_values) -> np.ndarray:
        h_values = np.asarray(h_values, dtype=float)
        if h_values.shape != (self.n_intervals,):
            raise ValueError(
                f"expected {self.n_intervals} surface values, got {h_values.shape}"
            )
        cond = conductivity / self.refs.conductivity
        cap = heat_capacity / self.refs.heat_capacity
        lam = (
            self._dimless.fourier * cond / cap * self._dt_star / self._dx**2
        )
        substeps = self.settings.bootstrap_substeps
        if substeps is None:
            substeps = max(1, math.ceil(lam / STABILITY_LIMIT - 1e-12))
        boot_times = np.linspace(0.0, self._dt_star, substeps + 1)
        dl = self._dimless
        boot_air = np.interp(boot_times, dl.air.times, dl.air.values)
        boot_deep = np.interp(boot_times, dl.deep.times, dl.deep.values)
        boot_q = np.interp(boot_times, dl.radiation.times, dl.radiation.values)
        h_star = h_values / self.refs.surface_coefficient
        boot_h = h_star[dl.surface.interval_index(np.minimum(boot_times, dl.horizon))]
        return _integrate_kernel(
            self._u0,
            lam,
            cond,
            self._dx,
            dl.biot,
            self._u_air,
            self._u_deep,
            self._q_star,
            h_star[self._h_index],
            boot_air,
            boot_deep,
            boot_q,
            boot_h,
        )

    def predict(self, conductivity: float, heat_capacity: float, h_values) -> np.ndarray:
        """Sensor temperatures, (n_sensors, n_times) in kelvin."""
        field = self._run(conductivity, heat_capacity, h_values)
        pred = _bilinear(field.T, self._ix, self._wx, self._it, self._wt)
        if not np.all(np.isfinite(pred)):
            raise SolverFailure("non-finite temperature in sensor predictions")
        return pred * self.refs.temperature

    def solve(self, conductivity: float, heat_capacity: float, h_values) -> TemperatureField:
        """Full nodal field for the given parameter values."""
        field = self._run(conductivity, heat_capacity, h_values)
        if not np.all(np.isfinite(field)):
            level, node = np.argwhere(~np.isfinite(field))[0]
            raise SolverFailure(
                f"non-finite temperature at node {node}, time level {level}",
                node=int(node),
                level=int(level),
            )
        return TemperatureField(
            positions=np.linspace(0.0, self.problem.depth, self.settings.nodes),
            times=self.level_times,
            temperatures=np.ascontiguousarray(field.T) * self.refs.temperature,
        )
