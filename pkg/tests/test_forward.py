"""Forward solver tests against independent analytical oracles."""

from __future__ import annotations

import numpy as np
import pytest

import groundheat as gh
import groundheat.forward as fwd
from conftest import HOUR_S, make_problem


def fourier_decay_oracle(positions, times, diffusivity, depth, initial_fn, n_modes=40):
    """Separation-of-variables solution of the decay problem with both ends
    held at zero: sine series with numerically integrated coefficients.

    Independent of the finite-difference path on purpose; quadrature uses a
    dense trapezoid rule.
    """
    grid = np.linspace(0.0, depth, 4001)
    f = initial_fn(grid)
    modes = np.arange(1, n_modes + 1)
    basis = np.sin(np.pi * np.outer(modes, grid) / depth)
    coeff = (2.0 / depth) * np.trapezoid(basis * f, grid, axis=1)
    shape = np.sin(np.pi * np.outer(modes, positions) / depth)
    decay = np.exp(
        -diffusivity * (np.pi * modes[:, None] / depth) ** 2 * times[None, :]
    )
    return np.einsum("m,mx,mt->xt", coeff, shape, decay)


def unit_refs() -> gh.ReferenceScales:
    return gh.ReferenceScales(1.0, 1.0, 1.0, 1.0, 1.0)


def pinned_sine_problem():
    """Both boundaries effectively at zero via a huge surface coefficient."""
    span = [0.0, 0.1]
    zero = gh.TimeSeries(span, [0.0, 0.0])
    profile_x = np.linspace(0.0, 1.0, 201)
    problem = gh.PhysicalProblem(
        depth=1.0,
        final_time=0.1,
        material=gh.MaterialParams(1.0, 1.0),
        air_temperature=zero,
        net_radiation=zero,
        deep_temperature=zero,
        initial_profile=gh.PiecewiseLinearProfile(profile_x, np.sin(np.pi * profile_x)),
    )
    surface = gh.SurfaceCoefficient(span, [1e10])
    return problem, surface


def sine_decay_error(n_cells: int) -> float:
    problem, surface = pinned_sine_problem()
    steps = int(np.ceil(0.1 / (0.4 / n_cells**2)))
    settings = gh.SolverSettings(nodes=n_cells + 1, time_step=0.1 / steps)
    dimless = gh.nondimensionalize(problem, unit_refs(), surface)
    field = gh.solve_forward(dimless, settings)
    exact = fourier_decay_oracle(
        field.positions, field.times, 1.0, 1.0, lambda x: np.sin(np.pi * x)
    )
    return float(np.abs(field.temperatures - exact).max())


class TestSineDecayOracle:
    def test_error_below_tolerance_at_j100(self):
        assert sine_decay_error(100) < 1e-3

    def test_monotone_refinement(self):
        errors = [sine_decay_error(n) for n in (25, 50, 100)]
        assert errors[0] > errors[1] > errors[2]


def test_equilibrium_is_fixed_point(lit_material):
    """Uniform state with matching boundaries and zero flux stays put."""
    t_f = 28.0 * HOUR_S
    span = [0.0, t_f]
    const = gh.TimeSeries(span, [300.0, 300.0])
    zero = gh.TimeSeries(span, [0.0, 0.0])
    problem = gh.PhysicalProblem(
        0.05,
        t_f,
        lit_material,
        const,
        zero,
        const,
        gh.PiecewiseLinearProfile([0.0, 0.05], [300.0, 300.0]),
    )
    surface = gh.SurfaceCoefficient(span, [10.0])
    dimless = gh.nondimensionalize(problem, gh.ReferenceScales(), surface)
    field = gh.solve_forward(dimless, gh.SolverSettings(nodes=51, time_step=30.0))
    assert np.abs(field.temperatures - 300.0).max() <= 1e-10 * 300.0


def test_robin_steady_state():
    """kappa = h = 1, T_air = 0, T_deep = 1: the steady profile is
    0.5 + 0.5 x, so the surface settles at 0.5."""
    span = [0.0, 40.0]
    zero = gh.TimeSeries(span, [0.0, 0.0])
    one = gh.TimeSeries(span, [1.0, 1.0])
    problem = gh.PhysicalProblem(
        1.0,
        40.0,
        gh.MaterialParams(1.0, 1.0),
        zero,
        zero,
        one,
        gh.PiecewiseLinearProfile([0.0, 1.0], [1.0, 1.0]),
    )
    surface = gh.SurfaceCoefficient(span, [1.0])
    dimless = gh.nondimensionalize(problem, unit_refs(), surface)
    field = gh.solve_forward(dimless, gh.SolverSettings(nodes=51, time_step=0.02))
    assert field.temperatures[0, -1] == pytest.approx(0.5, abs=1e-4)
    expected_profile = 0.5 + 0.5 * field.positions
    assert np.abs(field.temperatures[:, -1] - expected_profile).max() < 1e-4


class TestNondimensionalize:
    def test_identity_scaling(self, small_problem):
        refs = gh.ReferenceScales(3600.0, 300.0, 2.27, 2.1e6, 10.0)
        surface = gh.SurfaceCoefficient([0.0, small_problem.final_time], [10.0])
        dimless = gh.nondimensionalize(small_problem, refs, surface)
        assert dimless.conductivity == 1.0
        assert dimless.heat_capacity == 1.0
        assert dimless.surface.values[0] == 1.0

    def test_fourier_number(self):
        refs = gh.ReferenceScales(3600.0, 300.0, 2.27, 2.1e6, 10.0)
        assert refs.fourier_number(0.05) == pytest.approx(1.5565714285714286, rel=1e-12)

    def test_biot_number(self):
        refs = gh.ReferenceScales(3600.0, 300.0, 2.27, 2.1e6, 10.0)
        assert refs.biot_number(0.05) == pytest.approx(0.22026431718061673, rel=1e-12)

    def test_radiation_scaling(self, small_problem):
        refs = gh.ReferenceScales(3600.0, 300.0, 2.27, 2.1e6, 10.0)
        surface = gh.SurfaceCoefficient([0.0, small_problem.final_time], [10.0])
        dimless = gh.nondimensionalize(small_problem, refs, surface)
        expected = small_problem.net_radiation.values * 0.05 / (2.27 * 300.0)
        assert np.allclose(dimless.radiation.values, expected, rtol=1e-14)

    def test_partition_span_mismatch_rejected(self, small_problem, default_refs):
        surface = gh.SurfaceCoefficient([0.0, 1.0], [10.0])
        with pytest.raises(ValueError, match="span"):
            gh.nondimensionalize(small_problem, default_refs, surface)


def test_max_principle_surrogate(lit_material):
    """With zero radiation the field stays inside the envelope of the
    initial and boundary data (up to a 1e-6 of the range)."""
    t_f = 7200.0
    t = np.linspace(0.0, t_f, 9)
    air = gh.TimeSeries(t, 300.0 + 10.0 * np.sin(2.0 * np.pi * t / t_f))
    deep = gh.TimeSeries(t, 296.0 + 2.0 * np.sin(2.0 * np.pi * t / t_f + 1.0))
    zero = gh.TimeSeries([0.0, t_f], [0.0, 0.0])
    problem = gh.PhysicalProblem(
        0.05,
        t_f,
        lit_material,
        air,
        zero,
        deep,
        gh.PiecewiseLinearProfile([0.0, 0.05], [293.0, 297.0]),
    )
    surface = gh.SurfaceCoefficient([0.0, t_f], [8.0])
    dimless = gh.nondimensionalize(problem, gh.ReferenceScales(), surface)
    field = gh.solve_forward(dimless, gh.SolverSettings(nodes=41, time_step=0.6))
    data = np.concatenate([air.values, deep.values, [293.0, 297.0]])
    margin = 1e-6 * (data.max() - data.min())
    assert field.temperatures.min() >= data.min() - margin
    assert field.temperatures.max() <= data.max() + margin


def test_dimensional_invariance(small_problem, small_settings):
    surface = gh.SurfaceCoefficient(
        [0.0, 7200.0, small_problem.final_time], [12.0, 9.0]
    )
    refs_a = gh.ReferenceScales(3600.0, 300.0, 2.27, 2.1e6, 10.0)
    refs_b = gh.ReferenceScales(7200.0, 250.0, 1.0, 1.0e6, 3.0)
    field_a = gh.solve_forward(
        gh.nondimensionalize(small_problem, refs_a, surface), small_settings
    )
    field_b = gh.solve_forward(
        gh.nondimensionalize(small_problem, refs_b, surface), small_settings
    )
    rel = np.abs(field_a.temperatures - field_b.temperatures) / np.abs(
        field_a.temperatures
    )
    assert rel.max() < 1e-8


def test_determinism(small_problem, small_settings, default_refs):
    surface = gh.SurfaceCoefficient([0.0, small_problem.final_time], [10.0])
    dimless = gh.nondimensionalize(small_problem, default_refs, surface)
    field_a = gh.solve_forward(dimless, small_settings)
    field_b = gh.solve_forward(dimless, small_settings)
    assert np.array_equal(field_a.temperatures, field_b.temperatures)


class TestPredictAtSensors:
    @pytest.fixture()
    def tiny_field(self):
        return gh.TemperatureField(
            positions=np.array([0.0, 0.5, 1.0]),
            times=np.array([0.0, 1.0, 2.0]),
            temperatures=np.array(
                [[300.0, 301.0, 302.0], [310.0, 311.0, 312.0], [320.0, 321.0, 322.0]]
            ),
        )

    def test_nodal_values_bit_exact(self, tiny_field):
        sensors = gh.MeasurementSet(
            [0.5], [1.0], [[0.0]], 0.1
        )
        predicted = gh.predict_at_sensors(tiny_field, sensors)
        assert predicted[0, 0] == 311.0

    def test_constant_field(self):
        field = gh.TemperatureField(
            positions=np.array([0.0, 1.0]),
            times=np.array([0.0, 1.0]),
            temperatures=np.full((2, 2), 300.0),
        )
        sensors = gh.MeasurementSet([0.25, 0.75], [0.3, 0.9], np.zeros((2, 2)), 0.1)
        assert np.all(gh.predict_at_sensors(field, sensors) == 300.0)

    def test_spatial_midpoint(self):
        field = gh.TemperatureField(
            positions=np.array([0.0, 1.0]),
            times=np.array([0.0, 1.0]),
            temperatures=np.array([[10.0, 10.0], [20.0, 20.0]]),
        )
        sensors = gh.MeasurementSet([0.5], [0.0], [[0.0]], 0.1)
        assert gh.predict_at_sensors(field, sensors)[0, 0] == pytest.approx(15.0)

    def test_out_of_range_rejected(self, tiny_field):
        sensors = gh.MeasurementSet([1.5], [1.0], [[0.0]], 0.1)
        with pytest.raises(ValueError, match="depth"):
            gh.predict_at_sensors(tiny_field, sensors)
        sensors = gh.MeasurementSet([0.5], [3.0], [[0.0]], 0.1)
        with pytest.raises(ValueError, match="time"):
            gh.predict_at_sensors(tiny_field, sensors)


class TestSolverSettings:
    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError, match="nodes"):
            gh.SolverSettings(nodes=3, time_step=1.0)

    def test_non_dividing_step_rejected(self):
        settings = gh.SolverSettings(nodes=11, time_step=0.3)
        with pytest.raises(ValueError, match="divide"):
            settings.level_count(100.0)

    def test_exact_division_accepted(self):
        settings = gh.SolverSettings(nodes=11, time_step=0.25)
        assert settings.level_count(100.0) == 400

    def test_default_settings_respect_stability(self, small_problem, default_refs):
        settings = gh.default_settings(small_problem, default_refs, nodes=101)
        dx = 1.0 / 100.0
        fo = default_refs.fourier_number(small_problem.depth)
        dt_star = settings.time_step / default_refs.time
        assert fo * dt_star / dx**2 <= 0.5 + 1e-12
        settings.level_count(small_problem.final_time)


def test_operator_matches_public_path(small_problem, small_settings, default_refs):
    """ForwardOperator.predict agrees with solve_forward + predict_at_sensors."""
    breakpoints = np.array([0.0, 7200.0, small_problem.final_time])
    h_values = np.array([12.0, 9.0])
    depths = np.array([0.0, 0.013, 0.04])
    times = np.array([0.0, 1800.0, 10000.0, small_problem.final_time])
    operator = gh.ForwardOperator(
        small_problem, default_refs, small_settings, breakpoints, depths, times
    )
    direct = operator.predict(
        small_problem.material.conductivity,
        small_problem.material.heat_capacity,
        h_values,
    )
    surface = gh.SurfaceCoefficient(breakpoints, h_values)
    field = gh.solve_forward(
        gh.nondimensionalize(small_problem, default_refs, surface), small_settings
    )
    sensors = gh.MeasurementSet(depths, times, np.zeros((3, 4)), 0.1)
    via_field = gh.predict_at_sensors(field, sensors)
    assert np.allclose(direct, via_field, rtol=1e-13, atol=1e-10)


def test_solver_failure_reports_location(monkeypatch, small_problem, default_refs):
    surface = gh.SurfaceCoefficient([0.0, small_problem.final_time], [10.0])
    dimless = gh.nondimensionalize(small_problem, default_refs, surface)

    def broken(dimless, settings):
        bad = np.full((5, 4), 300.0)
        bad[3, 2] = np.nan
        return bad

    monkeypatch.setattr(fwd, "_integrate", broken)
    with pytest.raises(gh.SolverFailure) as err:
        gh.solve_forward(dimless, gh.SolverSettings(nodes=11, time_step=3600.0))
    assert err.value.node == 2
    assert err.value.level == 3


def test_first_column_is_initial_profile(small_problem, small_settings, default_refs):
    surface = gh.SurfaceCoefficient([0.0, small_problem.final_time], [10.0])
    dimless = gh.nondimensionalize(small_problem, default_refs, surface)
    field = gh.solve_forward(dimless, small_settings)
    expected = small_problem.initial_profile(field.positions)
    assert np.allclose(field.temperatures[:, 0], expected, rtol=1e-12)


def test_bootstrap_substeps_handle_large_steps(lit_material, default_refs):
    """When the step exceeds the explicit limit (lambda ~ 5.5 here), the
    automatic Euler substepping reaches the first level cleanly; forcing a
    single unstable Euler step contaminates it, though the unconditionally
    stable scheme still cannot blow up."""
    problem = make_problem(4.0 * HOUR_S, lit_material)
    surface = gh.SurfaceCoefficient([0.0, problem.final_time], [10.0])
    dimless = gh.nondimensionalize(problem, default_refs, surface)
    fine = gh.solve_forward(dimless, gh.SolverSettings(nodes=41, time_step=1.0))
    auto = gh.solve_forward(dimless, gh.SolverSettings(nodes=41, time_step=8.0))
    forced = gh.solve_forward(
        dimless, gh.SolverSettings(nodes=41, time_step=8.0, bootstrap_substeps=1)
    )
    assert np.isfinite(forced.temperatures).all()
    first_level = fine.temperatures[:, 8]
    auto_err = np.abs(auto.temperatures[:, 1] - first_level).max()
    forced_err = np.abs(forced.temperatures[:, 1] - first_level).max()
    assert auto_err < 0.01
    assert forced_err > 10.0 * auto_err
