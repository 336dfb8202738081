from __future__ import annotations

import numpy as np
import pytest

import groundheat as gh
from groundheat.reference import DEFAULT_REFERENCES

DAY_S = 86400.0
HOUR_S = 3600.0


def smooth_forcing(final_time: float, cadence: float = 900.0):
    """Diurnal-looking boundary series sampled every `cadence` seconds.

    The air stays below the ground temperatures (sun-heated slab), so the
    convective exchange keeps a usable signal through the whole window.
    """
    n = int(round(final_time / cadence))
    t = np.linspace(0.0, final_time, n + 1)
    phase = 2.0 * np.pi * (t - 6.0 * HOUR_S) / DAY_S
    sun = np.sin(phase)
    air = gh.TimeSeries(t, 291.0 + 6.0 * np.sin(phase))
    radiation = gh.TimeSeries(
        t, 550.0 * np.clip(sun, 0.0, None) - 40.0 * np.clip(-sun, 0.0, None)
    )
    deep = gh.TimeSeries(
        t, 298.0 + 3.0 * np.sin(2.0 * np.pi * (t - 9.0 * HOUR_S) / DAY_S)
    )
    return air, radiation, deep


def make_problem(
    final_time: float,
    material: gh.MaterialParams,
    depth: float = 0.05,
    surface_t0: float = 295.0,
) -> gh.PhysicalProblem:
    air, radiation, deep = smooth_forcing(final_time)
    profile = gh.PiecewiseLinearProfile(
        [0.0, depth], [surface_t0, float(deep.values[0])]
    )
    return gh.PhysicalProblem(
        depth=depth,
        final_time=final_time,
        material=material,
        air_temperature=air,
        net_radiation=radiation,
        deep_temperature=deep,
        initial_profile=profile,
    )


@pytest.fixture(scope="session")
def lit_material() -> gh.MaterialParams:
    return gh.MaterialParams(2.27, 2.1e6)


@pytest.fixture(scope="session")
def default_refs() -> gh.ReferenceScales:
    return DEFAULT_REFERENCES


@pytest.fixture(scope="session")
def small_problem(lit_material) -> gh.PhysicalProblem:
    # 4 h window keeps each forward solve around a tenth of a millisecond.
    return make_problem(4.0 * HOUR_S, lit_material)


@pytest.fixture(scope="session")
def small_settings() -> gh.SolverSettings:
    return gh.SolverSettings(nodes=21, time_step=60.0)


@pytest.fixture(scope="session")
def small_sensors() -> tuple[np.ndarray, np.ndarray]:
    depths = np.array([0.0, 0.01, 0.02, 0.03, 0.04])
    times = np.arange(0.0, 4.0 * HOUR_S + 1.0, 900.0)
    return depths, times


def write_run_config(
    directory,
    *,
    final_time: float = 4.0 * HOUR_S,
    depth: float = 0.05,
    material: tuple[float, float] = (2.27, 2.1e6),
    breakpoints=None,
    h_values=(10.0, 10.0, 10.0),
    priors: dict | None = None,
    n_states: int = 400,
    omega="0.02",
    seed: int = 1,
    burn_in: int = 100,
    gamma0: float = 2.22,
    nodes: int = 21,
    dt_s: float = 60.0,
    sensor_depths=(0.0, 0.01, 0.02, 0.03, 0.04),
    cadence_s: float = 900.0,
    noise_std: float = 0.25,
    with_profile: bool = True,
):
    """Write a complete run configuration plus its boundary data files."""
    from pathlib import Path

    from groundheat import io as gio

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    air, radiation, deep = smooth_forcing(final_time)
    gio.write_series(air, directory / "air.csv")
    gio.write_series(radiation, directory / "radiation.csv")
    gio.write_series(deep, directory / "deep.csv")
    profile_line = ""
    if with_profile:
        profile = gh.PiecewiseLinearProfile(
            [0.0, depth], [295.0, float(deep.values[0])]
        )
        gio.write_profile(profile, directory / "initial.csv")
        profile_line = "initial_profile = initial.csv\n"
    if breakpoints is None:
        breakpoints = (0.0, final_time * 0.375, final_time * 0.75, final_time)
    defaults = {
        "kappa_mean": 2.27,
        "kappa_std": 0.1135,
        "C_mean": 2.1e6,
        "C_std": 0.021e6,
        "h_mean": 10.0,
        "h_std": 5.0,
    }
    if priors:
        defaults.update(priors)
    config = directory / "config.ini"
    config.write_text(
        "[geometry]\n"
        f"L_m = {depth}\n"
        f"t_f_s = {final_time}\n"
        "\n[material]\n"
        f"kappa = {material[0]}\n"
        f"C = {material[1]}\n"
        "\n[surface_h]\n"
        f"breakpoints_s = {', '.join(repr(float(b)) for b in breakpoints)}\n"
        f"values = {', '.join(repr(float(v)) for v in h_values)}\n"
        "\n[priors]\n"
        + "".join(f"{k} = {v}\n" for k, v in defaults.items())
        + "\n[mcmc]\n"
        f"n_states = {n_states}\n"
        f"omega = {omega}\n"
        f"seed = {seed}\n"
        f"burn_in = {burn_in}\n"
        "\n[smoothness]\n"
        f"gamma0 = {gamma0}\n"
        "\n[solver]\n"
        f"nodes = {nodes}\n"
        f"dt_s = {dt_s}\n"
        "\n[measurements]\n"
        f"sensor_depths_m = {', '.join(repr(float(d)) for d in sensor_depths)}\n"
        f"cadence_s = {cadence_s}\n"
        f"noise_std_K = {noise_std}\n"
        "\n[series]\n"
        "air_temperature = air.csv\n"
        "net_radiation = radiation.csv\n"
        "deep_temperature = deep.csv\n"
        + profile_line,
        encoding="utf-8",
    )
    return config
