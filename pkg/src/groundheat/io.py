"""File formats, configuration and synthetic data generation.

All files are UTF-8 CSV/INI/JSON with SI units and LF line endings:

* series CSV: header ``time_s,value``;
* measurement CSV: header ``time_s,depth_m,temperature_K``;
* chain CSV: ``index,<parameter columns>,log_posterior,accepted``;
* run configuration: INI sections described in the README.

Floats are written with :func:`repr`, which round-trips exactly, so a
write-then-read cycle reproduces every value bit for bit.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import (
    MaterialParams,
    MeasurementSet,
    PhysicalProblem,
    PiecewiseLinearProfile,
    ReferenceScales,
    SurfaceCoefficient,
    TimeSeries,
)
from .forward import ForwardOperator, SolverSettings
from .inference import Chain, MHConfig
from .reference import (
    DEFAULT_REFERENCES,
    WIND_CORRELATION_INTERCEPT,
    WIND_CORRELATION_SLOPE,
)

__all__ = [
    "ParseError",
    "ConfigError",
    "load_series",
    "write_series",
    "interpolate",
    "initial_profile_from_sensors",
    "load_profile",
    "write_profile",
    "moving_average",
    "celsius_to_kelvin",
    "hours_to_seconds",
    "TwinSpec",
    "generate_twin_data",
    "empirical_h_from_wind",
    "load_measurements",
    "write_measurements",
    "write_chain",
    "read_chain",
    "write_summary",
    "write_manifest",
    "PriorSettings",
    "MeasurementPlan",
    "SeriesPaths",
    "RunConfig",
    "parse_config",
]

ZERO_CELSIUS = 273.15

SERIES_HEADER = ["time_s", "value"]
PROFILE_HEADER = ["depth_m", "value"]
MEASUREMENT_HEADER = ["time_s", "depth_m", "temperature_K"]


class ParseError(ValueError):
    """Malformed data file; line is the 1-based line number in the file."""

    def __init__(self, message: str, path=None, line: int | None = None):
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


class ConfigError(ValueError):
    """Invalid run configuration; key names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _format(value: float) -> str:
    return repr(float(value))


def _read_rows(path, expected_header: list[str]):
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path, line=1) from None
        if [h.strip() for h in header] != expected_header:
            raise ParseError(
                f"expected header {','.join(expected_header)!r}, got "
                f"{','.join(header)!r}",
                path=path,
                line=1,
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ParseError(
                    f"expected {len(expected_header)} columns, got {len(row)}",
                    path=path,
                    line=line_no,
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise ParseError(
                    f"could not parse {row!r} as numbers", path=path, line=line_no
                ) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite value", path=path, line=line_no)
            rows.append((line_no, values))
    return path, rows


def load_series(path, hours: bool = False, celsius: bool = False) -> TimeSeries:
    """Read a ``time_s,value`` series, validating schema and monotonicity.

    hours / celsius convert human-prepared files to SI on ingest; celsius
    only makes sense for temperature-valued series.
    """
    path, rows = _read_rows(path, SERIES_HEADER)
    if len(rows) < 2:
        raise ParseError("a series needs at least 2 samples", path=path, line=len(rows) + 1)
    previous = None
    for line_no, (time, _) in rows:
        if previous is not None and time <= previous:
            raise ParseError(
                f"time {time} does not increase past {previous}",
                path=path,
                line=line_no,
            )
        previous = time
    data = np.array([values for _, values in rows])
    times = hours_to_seconds(data[:, 0]) if hours else data[:, 0]
    values = celsius_to_kelvin(data[:, 1]) if celsius else data[:, 1]
    return TimeSeries(times, values)


def write_series(series: TimeSeries, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(SERIES_HEADER) + "\n")
        for t, v in zip(series.times, series.values):
            handle.write(f"{_format(t)},{_format(v)}\n")


def interpolate(series: TimeSeries, t):
    """Piecewise-linear interpolation at t (scalar or array) within the span."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < series.start) or np.any(t_arr > series.end):
        raise ValueError(
            f"time {t!r} outside the series span [{series.start}, {series.end}]"
        )
    result = np.interp(t_arr, series.times, series.values)
    return float(result) if np.isscalar(t) or t_arr.ndim == 0 else result


def initial_profile_from_sensors(depths, temperatures, depth_limit: float) -> PiecewiseLinearProfile:
    """Initial temperature profile from sensor readings at the start time.

    Piecewise linear between sensors, constant beyond the outermost ones
    (no gradient is invented outside the instrumented span).
    """
    depths = np.asarray(depths, dtype=float)
    temperatures = np.asarray(temperatures, dtype=float)
    if depths.size < 2:
        raise ValueError("at least two sensors are needed for a profile")
    if np.any(depths < 0.0) or np.any(depths > depth_limit):
        raise ValueError(f"sensor depths must lie within [0, {depth_limit}] m")
    return PiecewiseLinearProfile(depths, temperatures)


def load_profile(path, celsius: bool = False) -> PiecewiseLinearProfile:
    """Read a ``depth_m,value`` profile file (depths always in metres)."""
    path, rows = _read_rows(path, PROFILE_HEADER)
    if len(rows) < 2:
        raise ParseError("a profile needs at least 2 nodes", path=path, line=len(rows) + 1)
    data = np.array([values for _, values in rows])
    order = np.argsort(data[:, 0])
    values = celsius_to_kelvin(data[order, 1]) if celsius else data[order, 1]
    return PiecewiseLinearProfile(data[order, 0], values)


def write_profile(profile: PiecewiseLinearProfile, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(PROFILE_HEADER) + "\n")
        for x, v in zip(profile.positions, profile.values):
            handle.write(f"{_format(x)},{_format(v)}\n")


def moving_average(series: TimeSeries, window: float) -> TimeSeries:
    """Centered moving average over a time window, in seconds.

    Near the ends the half-width shrinks to what fits symmetrically, so the
    filter stays unbiased at the boundaries.  A window smaller than the
    local sample spacing leaves values unchanged.
    """
    if not math.isfinite(window) or window <= 0.0:
        raise ValueError(f"window must be positive, got {window!r}")
    times = series.times
    values = series.values
    half = window / 2.0
    smoothed = np.empty_like(values)
    for i, t in enumerate(times):
        reach = min(half, t - times[0], times[-1] - t)
        lo = np.searchsorted(times, t - reach, side="left")
        hi = np.searchsorted(times, t + reach, side="right")
        smoothed[i] = values[lo:hi].mean()
    return TimeSeries(times, smoothed)


def celsius_to_kelvin(values):
    return np.asarray(values, dtype=float) + ZERO_CELSIUS


def hours_to_seconds(values):
    return np.asarray(values, dtype=float) * 3600.0


@dataclass(frozen=True)
class TwinSpec:
    """Ground truth and observation plan for a synthetic experiment."""

    material: MaterialParams
    surface: SurfaceCoefficient
    sensor_depths: np.ndarray
    cadence: float
    noise_std: float
    seed: int

    def __post_init__(self):
        depths = np.asarray(self.sensor_depths, dtype=float)
        if not math.isfinite(self.cadence) or self.cadence <= 0.0:
            raise ValueError(f"cadence must be positive, got {self.cadence!r}")
        if not math.isfinite(self.noise_std) or self.noise_std < 0.0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std!r}")
        object.__setattr__(self, "sensor_depths", depths)


def generate_twin_data(
    twin: TwinSpec,
    problem: PhysicalProblem,
    refs: ReferenceScales,
    settings: SolverSettings,
) -> MeasurementSet:
    """Solve the forward problem with the true parameters and sample it.

    The problem supplies geometry, boundary series and the initial profile;
    its material is replaced by the twin's ground truth.  Observation times
    run from 0 at the given cadence up to the final time.  Gaussian noise
    with the twin's standard deviation is added independently per sensor
    and time; the draw is deterministic given the seed, and a zero standard
    deviation returns the noiseless predictions unchanged.
    """
    n_obs = int(math.floor(problem.final_time / twin.cadence + 1e-9))
    times = np.arange(n_obs + 1) * twin.cadence
    operator = ForwardOperator(
        problem, refs, settings, twin.surface.breakpoints, twin.sensor_depths, times
    )
    clean = operator.predict(
        twin.material.conductivity, twin.material.heat_capacity, twin.surface.values
    )
    if twin.noise_std > 0.0:
        rng = np.random.default_rng(twin.seed)
        clean = clean + rng.normal(0.0, twin.noise_std, size=clean.shape)
    return MeasurementSet(twin.sensor_depths, times, clean, twin.noise_std)


def empirical_h_from_wind(velocity):
    """District-scale empirical correlation h(v) = 4 + 4 v for v >= 0 m/s."""
    v = np.asarray(velocity, dtype=float)
    if np.any(v < 0.0) or not np.all(np.isfinite(v)):
        raise ValueError(f"wind velocity must be non-negative, got {velocity!r}")
    result = WIND_CORRELATION_INTERCEPT + WIND_CORRELATION_SLOPE * v
    return float(result) if np.isscalar(velocity) or v.ndim == 0 else result


def load_measurements(
    path, noise_std: float, hours: bool = False, celsius: bool = False
) -> MeasurementSet:
    """Read a long-format measurement CSV into a MeasurementSet.

    Every (time, depth) pair must appear exactly once; the noise standard
    deviation comes from the run configuration, not the file.
    """
    path, rows = _read_rows(path, MEASUREMENT_HEADER)
    if not rows:
        raise ParseError("no measurement rows", path=path, line=2)
    data = np.array([values for _, values in rows])
    times = np.unique(data[:, 0])
    depths = np.unique(data[:, 1])
    matrix = np.full((depths.size, times.size), np.nan)
    t_index = {t: i for i, t in enumerate(times)}
    d_index = {d: i for i, d in enumerate(depths)}
    for line_no, (t, d, temp) in rows:
        i, j = d_index[d], t_index[t]
        if not np.isnan(matrix[i, j]):
            raise ParseError(
                f"duplicate sample for time {t}, depth {d}", path=path, line=line_no
            )
        matrix[i, j] = temp
    if np.any(np.isnan(matrix)):
        i, j = np.argwhere(np.isnan(matrix))[0]
        raise ParseError(
            f"missing sample for time {times[j]}, depth {depths[i]}", path=path
        )
    if hours:
        times = hours_to_seconds(times)
    if celsius:
        matrix = celsius_to_kelvin(matrix)
    return MeasurementSet(depths, times, matrix, noise_std)


def write_measurements(measurements: MeasurementSet, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(MEASUREMENT_HEADER) + "\n")
        for j, t in enumerate(measurements.observation_times):
            for i, d in enumerate(measurements.sensor_depths):
                handle.write(
                    f"{_format(t)},{_format(d)},"
                    f"{_format(measurements.temperatures[i, j])}\n"
                )


def write_chain(chain: Chain, path) -> None:
    """One row per state: index, parameters in SI units, log-posterior,
    accepted flag (0/1)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("index," + ",".join(chain.parameter_names) + ",log_posterior,accepted\n")
        for k in range(chain.n_states):
            cells = [str(k)]
            cells += [_format(v) for v in chain.samples[k]]
            cells.append(_format(chain.log_posterior[k]))
            cells.append("1" if chain.accepted[k] else "0")
            handle.write(",".join(cells) + "\n")


def read_chain(path, seed: int = 0) -> Chain:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path, line=1) from None
        if (
            len(header) < 4
            or header[0] != "index"
            or header[-2:] != ["log_posterior", "accepted"]
        ):
            raise ParseError("not a chain file", path=path, line=1)
        names = tuple(header[1:-2])
        samples, logpost, accepted = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} columns, got {len(row)}",
                    path=path,
                    line=line_no,
                )
            try:
                samples.append([float(c) for c in row[1:-2]])
                logpost.append(float(row[-2]))
                accepted.append(bool(int(row[-1])))
            except ValueError:
                raise ParseError(
                    f"could not parse {row!r}", path=path, line=line_no
                ) from None
    if not samples:
        raise ParseError("chain file has no states", path=path, line=2)
    return Chain(np.array(samples), np.array(accepted), np.array(logpost), seed, names)


def write_summary(summary_dict: dict, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(summary_dict, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_manifest(path, command, config_path, seed, started, finished, outputs) -> None:
    """Reproducibility record for one CLI run.

    Contains wall-clock timestamps by design, so manifests are the one
    artifact that differs between otherwise identical runs.
    """
    digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    manifest = {
        "command": list(command),
        "config": str(config_path),
        "config_sha256": digest,
        "seed": seed,
        "started": started,
        "finished": finished,
        "outputs": [str(p) for p in outputs],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorSettings:
    """Independent prior means and standard deviations from [priors]."""

    conductivity_mean: float
    conductivity_std: float
    capacity_mean: float
    capacity_std: float
    surface_mean: float
    surface_std: float


@dataclass(frozen=True)
class MeasurementPlan:
    """Sensor depths, cadence and noise level from [measurements]."""

    sensor_depths: np.ndarray
    cadence: float
    noise_std: float


@dataclass(frozen=True)
class SeriesPaths:
    """Resolved boundary-data file paths from [series]."""

    air_temperature: Path
    net_radiation: Path
    deep_temperature: Path
    initial_profile: Path | None


@dataclass(frozen=True)
class RunConfig:
    """Typed view of one INI run configuration."""

    depth: float
    final_time: float
    material: MaterialParams
    surface: SurfaceCoefficient
    priors: PriorSettings
    mcmc: MHConfig
    smoothness_scale: float
    solver: SolverSettings
    measurements: MeasurementPlan
    series: SeriesPaths
    references: ReferenceScales


def _get(parser: configparser.ConfigParser, section: str, key: str) -> str:
    if not parser.has_section(section):
        raise ConfigError(f"missing section [{section}]", key=section)
    if not parser.has_option(section, key):
        raise ConfigError(f"missing key '{key}' in section [{section}]", key=f"{section}.{key}")
    return parser.get(section, key)


def _get_float(parser, section, key) -> float:
    raw = _get(parser, section, key)
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: expected a number, got {raw!r}", key=f"{section}.{key}"
        ) from None
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key}: non-finite value", key=f"{section}.{key}")
    return value


def _get_int(parser, section, key) -> int:
    value = _get_float(parser, section, key)
    if int(value) != value:
        raise ConfigError(
            f"[{section}] {key}: expected an integer, got {value!r}",
            key=f"{section}.{key}",
        )
    return int(value)


def _get_floats(parser, section, key) -> np.ndarray:
    raw = _get(parser, section, key)
    try:
        return np.array([float(part) for part in raw.split(",") if part.strip()])
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: expected comma-separated numbers, got {raw!r}",
            key=f"{section}.{key}",
        ) from None


def parse_config(path) -> RunConfig:
    """Parse and validate a run configuration file.

    Raises ConfigError naming the offending section or key on any problem.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    parser.read(path, encoding="utf-8")

    depth = _get_float(parser, "geometry", "L_m")
    final_time = _get_float(parser, "geometry", "t_f_s")
    if depth <= 0.0:
        raise ConfigError("[geometry] L_m must be positive", key="geometry.L_m")
    if final_time <= 0.0:
        raise ConfigError("[geometry] t_f_s must be positive", key="geometry.t_f_s")

    def wrap(section, key, builder, *args):
        try:
            return builder(*args)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", key=f"{section}.{key}") from exc

    material = wrap(
        "material",
        "kappa",
        MaterialParams,
        _get_float(parser, "material", "kappa"),
        _get_float(parser, "material", "C"),
    )
    breakpoints = _get_floats(parser, "surface_h", "breakpoints_s")
    h_values = _get_floats(parser, "surface_h", "values")
    surface = wrap("surface_h", "breakpoints_s", SurfaceCoefficient, breakpoints, h_values)
    if abs(surface.final_time - final_time) > 1e-9 * final_time:
        raise ConfigError(
            f"[surface_h] breakpoints_s: last breakpoint {surface.final_time} "
            f"does not equal t_f_s {final_time}",
            key="surface_h.breakpoints_s",
        )

    priors = PriorSettings(
        conductivity_mean=_get_float(parser, "priors", "kappa_mean"),
        conductivity_std=_get_float(parser, "priors", "kappa_std"),
        capacity_mean=_get_float(parser, "priors", "C_mean"),
        capacity_std=_get_float(parser, "priors", "C_std"),
        surface_mean=_get_float(parser, "priors", "h_mean"),
        surface_std=_get_float(parser, "priors", "h_std"),
    )
    for field_name in (
        "conductivity_mean",
        "conductivity_std",
        "capacity_mean",
        "capacity_std",
        "surface_mean",
        "surface_std",
    ):
        if getattr(priors, field_name) <= 0.0:
            raise ConfigError(
                f"[priors] values must be positive ({field_name})", key=f"priors.{field_name}"
            )

    omega = _get_floats(parser, "mcmc", "omega")
    mcmc = wrap(
        "mcmc",
        "n_states",
        MHConfig,
        _get_int(parser, "mcmc", "n_states"),
        omega[0] if omega.size == 1 else omega,
        _get_int(parser, "mcmc", "seed"),
        _get_int(parser, "mcmc", "burn_in"),
    )

    smoothness_scale = _get_float(parser, "smoothness", "gamma0")
    if smoothness_scale <= 0.0:
        raise ConfigError("[smoothness] gamma0 must be positive", key="smoothness.gamma0")

    substeps = None
    if parser.has_option("solver", "bootstrap_substeps"):
        raw = parser.get("solver", "bootstrap_substeps").strip()
        if raw.lower() not in ("", "auto"):
            substeps = _get_int(parser, "solver", "bootstrap_substeps")
    solver = wrap(
        "solver",
        "nodes",
        SolverSettings,
        _get_int(parser, "solver", "nodes"),
        _get_float(parser, "solver", "dt_s"),
        substeps,
    )

    depths = _get_floats(parser, "measurements", "sensor_depths_m")
    if depths.size < 1 or np.any(np.diff(depths) <= 0.0):
        raise ConfigError(
            "[measurements] sensor_depths_m must be strictly increasing",
            key="measurements.sensor_depths_m",
        )
    plan = MeasurementPlan(
        sensor_depths=depths,
        cadence=_get_float(parser, "measurements", "cadence_s"),
        noise_std=_get_float(parser, "measurements", "noise_std_K"),
    )
    if plan.cadence <= 0.0:
        raise ConfigError(
            "[measurements] cadence_s must be positive", key="measurements.cadence_s"
        )
    if plan.noise_std < 0.0:
        raise ConfigError(
            "[measurements] noise_std_K must be non-negative",
            key="measurements.noise_std_K",
        )

    base = path.parent

    def series_path(key: str, required: bool) -> Path | None:
        if not required and not (
            parser.has_section("series") and parser.has_option("series", key)
        ):
            return None
        return (base / _get(parser, "series", key)).resolve()

    series = SeriesPaths(
        air_temperature=series_path("air_temperature", required=True),
        net_radiation=series_path("net_radiation", required=True),
        deep_temperature=series_path("deep_temperature", required=True),
        initial_profile=series_path("initial_profile", required=False),
    )

    references = DEFAULT_REFERENCES
    if parser.has_section("reference"):
        references = wrap(
            "reference",
            "t_ref_s",
            ReferenceScales,
            _get_float(parser, "reference", "t_ref_s"),
            _get_float(parser, "reference", "T_ref_K"),
            _get_float(parser, "reference", "kappa_ref"),
            _get_float(parser, "reference", "C_ref"),
            _get_float(parser, "reference", "h_ref"),
        )

    return RunConfig(
        depth=depth,
        final_time=final_time,
        material=material,
        surface=surface,
        priors=priors,
        mcmc=mcmc,
        smoothness_scale=smoothness_scale,
        solver=solver,
        measurements=plan,
        series=series,
        references=references,
    )
