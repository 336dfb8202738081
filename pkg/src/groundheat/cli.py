"""Batch command-line front end.

Subcommands share one configuration file and write their artifacts under an
output directory:

* ``forward``      solve the forward problem at the configured parameters
* ``sensitivity``  finite-difference sensitivity study
* ``synth``        generate a synthetic twin measurement set
* ``estimate``     run the MCMC estimation (caseAB or caseC mode)
* ``diagnose``     post-process a chain file into plot-ready CSVs
* ``residuals``    residual analysis of a chain's posterior means

Exit codes: 0 on success, 2 for invalid configuration or data files,
3 for solver or sampler failures.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import diagnostics, io
from .domain import (
    MeasurementSet,
    ParameterLayout,
    ParameterVector,
    PhysicalProblem,
    build_uniform_partition,
)
from .forward import ForwardOperator, SolverFailure
from .inference import (
    GaussianPrior,
    SmoothnessPrior,
    case_ab_posterior,
    case_c_posterior,
    run_chain,
)
from .io import ConfigError, ParseError, RunConfig
from .sensitivity import sensitivities

__all__ = ["main", "entrypoint"]


class PipelineError(RuntimeError):
    """Solver or sampler failure during an otherwise valid run."""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _build_series(config: RunConfig, args) -> dict:
    series = {
        "air": io.load_series(
            config.series.air_temperature, hours=args.hours, celsius=args.celsius
        ),
        "radiation": io.load_series(config.series.net_radiation, hours=args.hours),
        "deep": io.load_series(
            config.series.deep_temperature, hours=args.hours, celsius=args.celsius
        ),
    }
    if args.filter_radiation is not None:
        series["radiation"] = io.moving_average(series["radiation"], args.filter_radiation)
    return series


def _build_problem(
    config: RunConfig, args, measurements: MeasurementSet | None = None
) -> PhysicalProblem:
    """Assemble the physical problem; the initial profile comes from the
    configured profile file, else from the earliest measurement row."""
    series = _build_series(config, args)
    if config.series.initial_profile is not None:
        profile = io.load_profile(config.series.initial_profile, celsius=args.celsius)
    elif measurements is not None:
        profile = io.initial_profile_from_sensors(
            measurements.sensor_depths,
            measurements.temperatures[:, 0],
            config.depth,
        )
    else:
        raise ConfigError(
            "missing key 'initial_profile' in section [series] "
            "(required when no measurement file supplies t = 0 temperatures)",
            key="series.initial_profile",
        )
    return PhysicalProblem(
        depth=config.depth,
        final_time=config.final_time,
        material=config.material,
        air_temperature=series["air"],
        net_radiation=series["radiation"],
        deep_temperature=series["deep"],
        initial_profile=profile,
    )


def _observation_times(config: RunConfig) -> np.ndarray:
    plan = config.measurements
    count = int(np.floor(config.final_time / plan.cadence + 1e-9))
    return np.arange(count + 1) * plan.cadence


def _mcmc_config(config: RunConfig, args):
    mcmc = config.mcmc
    if getattr(args, "seed", None) is not None:
        mcmc = replace(mcmc, seed=args.seed)
    return mcmc


def _write_manifest(args, out_dir: Path, seed, started, outputs) -> Path:
    path = out_dir / "manifest.json"
    io.write_manifest(
        path,
        command=sys.argv if args.argv_echo is None else args.argv_echo,
        config_path=args.config,
        seed=seed,
        started=started,
        finished=_now(),
        outputs=[str(p) for p in outputs],
    )
    return path


def _cmd_forward(args) -> int:
    started = _now()
    config = io.parse_config(args.config)
    problem = _build_problem(config, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    times = _observation_times(config)
    operator = ForwardOperator(
        problem,
        config.references,
        config.solver,
        config.surface.breakpoints,
        config.measurements.sensor_depths,
        times,
    )
    try:
        predictions = operator.predict(
            config.material.conductivity,
            config.material.heat_capacity,
            config.surface.values,
        )
    except SolverFailure as exc:
        raise PipelineError(str(exc)) from exc

    out_csv = out_dir / "temperatures.csv"
    io.write_measurements(
        MeasurementSet(config.measurements.sensor_depths, times, predictions, 0.0),
        out_csv,
    )
    _write_manifest(args, out_dir, config.mcmc.seed, started, [out_csv])
    return 0


def _cmd_sensitivity(args) -> int:
    started = _now()
    config = io.parse_config(args.config)
    problem = _build_problem(config, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    times = _observation_times(config)
    depths = config.measurements.sensor_depths
    sensors = MeasurementSet(
        depths, times, np.zeros((depths.size, times.size)), config.measurements.noise_std
    )
    layout = ParameterLayout(config.surface.n_intervals)
    params = ParameterVector.pack(
        layout,
        config.material.conductivity,
        config.material.heat_capacity,
        config.surface.values,
    )
    try:
        matrix = sensitivities(
            problem,
            config.references,
            config.solver,
            params,
            sensors,
            config.surface.breakpoints,
            reduced=args.reduced,
        )
    except SolverFailure as exc:
        raise PipelineError(str(exc)) from exc

    out_csv = out_dir / "sensitivity.csv"
    with open(out_csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("sensor,parameter,time_s,value\n")
        for i, depth in enumerate(matrix.sensor_depths):
            for j, name in enumerate(matrix.parameter_names):
                for n, t in enumerate(matrix.observation_times):
                    handle.write(
                        f"{repr(float(depth))},{name},{repr(float(t))},"
                        f"{repr(float(matrix.values[i, j, n]))}\n"
                    )
    _write_manifest(args, out_dir, config.mcmc.seed, started, [out_csv])
    return 0


def _cmd_synth(args) -> int:
    started = _now()
    config = io.parse_config(args.config)
    problem = _build_problem(config, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    seed = args.seed if args.seed is not None else config.mcmc.seed
    twin = io.TwinSpec(
        material=config.material,
        surface=config.surface,
        sensor_depths=config.measurements.sensor_depths,
        cadence=config.measurements.cadence,
        noise_std=config.measurements.noise_std,
        seed=seed,
    )
    try:
        measurements = io.generate_twin_data(
            twin, problem, config.references, config.solver
        )
    except SolverFailure as exc:
        raise PipelineError(str(exc)) from exc

    out_csv = out_dir / "measurements.csv"
    io.write_measurements(measurements, out_csv)
    _write_manifest(args, out_dir, seed, started, [out_csv])
    return 0


def _build_posterior(config: RunConfig, problem: PhysicalProblem, measurements, mode):
    priors = config.priors
    if mode == "caseAB":
        breakpoints = config.surface.breakpoints
        n_int = config.surface.n_intervals
        prior = GaussianPrior(
            np.concatenate(
                [
                    [priors.conductivity_mean, priors.capacity_mean],
                    np.full(n_int, priors.surface_mean),
                ]
            ),
            np.concatenate(
                [
                    [priors.conductivity_std, priors.capacity_std],
                    np.full(n_int, priors.surface_std),
                ]
            ),
        )
        posterior = case_ab_posterior(
            problem, config.references, config.solver, breakpoints, measurements, prior
        )
        initial = prior.mean.copy()
    else:
        ratio = config.final_time / config.measurements.cadence
        n_int = round(ratio)
        if abs(ratio - n_int) > 1e-9 * max(1, n_int) or n_int < 2:
            raise ConfigError(
                f"[measurements] cadence_s must divide t_f_s into at least 2 "
                f"intervals for caseC (got ratio {ratio})",
                key="measurements.cadence_s",
            )
        breakpoints = build_uniform_partition(config.final_time, n_int)
        material_prior = GaussianPrior(
            [priors.conductivity_mean, priors.capacity_mean],
            [priors.conductivity_std, priors.capacity_std],
        )
        smoothness = SmoothnessPrior(n_int, config.smoothness_scale)
        posterior = case_c_posterior(
            problem,
            config.references,
            config.solver,
            breakpoints,
            measurements,
            material_prior,
            smoothness,
        )
        initial = np.concatenate(
            [
                [priors.conductivity_mean, priors.capacity_mean],
                np.full(n_int, priors.surface_mean),
                [config.smoothness_scale],
            ]
        )
    return posterior, initial


def _cmd_estimate(args) -> int:
    started = _now()
    config = io.parse_config(args.config)
    measurements = io.load_measurements(
        args.data, config.measurements.noise_std, hours=args.hours, celsius=args.celsius
    )
    problem = _build_problem(config, args, measurements=measurements)
    posterior, initial = _build_posterior(config, problem, measurements, args.mode)
    layout = posterior.layout
    mcmc = _mcmc_config(config, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    names = layout.names()
    scales = initial
    configs = [replace(mcmc, seed=mcmc.seed + k) for k in range(args.chains)]

    def one(cfg):
        return run_chain(cfg, posterior.log_posterior, initial, scales, names)

    try:
        if args.chains == 1:
            chains = [one(configs[0])]
        else:
            with ThreadPoolExecutor(max_workers=args.chains) as pool:
                chains = list(pool.map(one, configs))
    except (SolverFailure, ValueError) as exc:
        raise PipelineError(f"sampling failed: {exc}") from exc

    outputs = []
    for k, chain in enumerate(chains):
        chain_csv = out_dir / f"chain_{k}.csv"
        io.write_chain(chain, chain_csv)
        outputs.append(chain_csv)

    burn = mcmc.burn_in
    pooled = np.concatenate([c.samples[burn:] for c in chains], axis=0)
    rates = [diagnostics.summarize(c, burn).acceptance_rate for c in chains]
    means = pooled.mean(axis=0)
    summary = {
        "mode": args.mode,
        "burn_in": burn,
        "n_states": mcmc.n_states,
        "chains": args.chains,
        "acceptance_rate": float(np.mean(rates)),
        "acceptance_rate_per_chain": [float(r) for r in rates],
        "parameters": {
            name: {"mean": float(m), "std": float(s)}
            for name, m, s in zip(names, means, pooled.std(axis=0))
        },
    }

    conductivity, capacity, h_values, _ = layout.unpack(means)
    try:
        predictions = posterior.operator.predict(conductivity, capacity, h_values)
    except SolverFailure as exc:
        raise PipelineError(str(exc)) from exc
    report = diagnostics.residual_report(
        measurements.temperatures, predictions, measurements.noise_std
    )
    summary["residuals"] = {
        "max_absolute_K": [float(v) for v in report.max_absolute],
        "max_relative_pct": [float(v) for v in report.max_relative_pct],
        "within_noise_fraction": report.within_noise_fraction,
    }

    residual_csv = out_dir / "residuals.csv"
    _write_residual_csv(residual_csv, measurements, predictions)
    summary_json = out_dir / "summary.json"
    io.write_summary(summary, summary_json)
    outputs += [summary_json, residual_csv]
    _write_manifest(args, out_dir, mcmc.seed, started, outputs)
    return 0


def _write_residual_csv(path, measurements: MeasurementSet, predictions) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("time_s,depth_m,measured_K,predicted_K,residual_K\n")
        for j, t in enumerate(measurements.observation_times):
            for i, d in enumerate(measurements.sensor_depths):
                measured = measurements.temperatures[i, j]
                predicted = predictions[i, j]
                handle.write(
                    f"{repr(float(t))},{repr(float(d))},{repr(float(measured))},"
                    f"{repr(float(predicted))},{repr(float(measured - predicted))}\n"
                )


def _cmd_diagnose(args) -> int:
    started = _now()
    config = io.parse_config(args.config)
    chain = io.read_chain(args.chain)
    burn = args.burn_in if args.burn_in is not None else config.mcmc.burn_in
    if not 0 <= burn < chain.n_states:
        raise ConfigError(
            f"burn-in {burn} is not below the chain length {chain.n_states}",
            key="mcmc.burn_in",
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    summary = diagnostics.summarize(chain, burn)
    summary_json = out_dir / "summary.json"
    io.write_summary(summary.as_dict(), summary_json)
    outputs.append(summary_json)

    post = chain.samples[burn:]
    names = chain.parameter_names

    stride = max(1, int(np.ceil(chain.n_states / args.thin)))
    trace_csv = out_dir / "trace.csv"
    with open(trace_csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("index," + ",".join(names) + ",log_posterior\n")
        for k in range(0, chain.n_states, stride):
            cells = [str(k)]
            cells += [repr(float(v)) for v in chain.samples[k]]
            cells.append(repr(float(chain.log_posterior[k])))
            handle.write(",".join(cells) + "\n")
    outputs.append(trace_csv)

    geweke = diagnostics.geweke_relative_difference(post)
    geweke_csv = out_dir / "geweke.csv"
    with open(geweke_csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("parameter,relative_difference\n")
        for name, value in zip(names, np.atleast_1d(geweke)):
            handle.write(f"{name},{repr(float(value))}\n")
    outputs.append(geweke_csv)

    iact_csv = out_dir / "iact.csv"
    with open(iact_csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("parameter,iact\n")
        for j, name in enumerate(names):
            try:
                tau = diagnostics.integrated_autocorrelation_time(post[:, j])
            except ValueError:
                tau = float("nan")
            handle.write(f"{name},{repr(float(tau))}\n")
    outputs.append(iact_csv)

    max_lag = min(post.shape[0] - 1, args.max_lag)
    acov_columns = [diagnostics.autocovariance(post[:, j])[: max_lag + 1] for j in range(post.shape[1])]
    acov = np.stack(acov_columns, axis=1)
    norm = np.sqrt((acov**2).sum(axis=1))
    acov_csv = out_dir / "autocovariance.csv"
    with open(acov_csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("lag," + ",".join(names) + ",norm\n")
        for lag in range(max_lag + 1):
            cells = [str(lag)]
            cells += [repr(float(v)) for v in acov[lag]]
            cells.append(repr(float(norm[lag])))
            handle.write(",".join(cells) + "\n")
    outputs.append(acov_csv)

    hist_csv = out_dir / "histograms.csv"
    with open(hist_csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("parameter,bin_left,bin_right,count\n")
        for j, name in enumerate(names):
            edges, counts = diagnostics.histogram(post[:, j])
            for b in range(counts.size):
                handle.write(
                    f"{name},{repr(float(edges[b]))},{repr(float(edges[b + 1]))},"
                    f"{int(counts[b])}\n"
                )
    outputs.append(hist_csv)

    _write_manifest(args, out_dir, chain.seed, started, outputs)
    return 0


def _cmd_residuals(args) -> int:
    started = _now()
    config = io.parse_config(args.config)
    measurements = io.load_measurements(
        args.data, config.measurements.noise_std, hours=args.hours, celsius=args.celsius
    )
    problem = _build_problem(config, args, measurements=measurements)
    chain = io.read_chain(args.chain)
    burn = args.burn_in if args.burn_in is not None else config.mcmc.burn_in
    if not 0 <= burn < chain.n_states:
        raise ConfigError(
            f"burn-in {burn} is not below the chain length {chain.n_states}",
            key="mcmc.burn_in",
        )

    n_h = sum(1 for name in chain.parameter_names if name.startswith("h_"))
    if n_h == config.surface.n_intervals:
        breakpoints = config.surface.breakpoints
    else:
        breakpoints = build_uniform_partition(config.final_time, n_h)
    layout = ParameterLayout(n_h, with_hyperparameter="gamma" in chain.parameter_names)
    if layout.size != chain.n_parameters:
        raise ConfigError(
            f"chain has {chain.n_parameters} parameter columns, expected "
            f"{layout.size} from its h_* columns",
            key="surface_h.values",
        )

    means = chain.samples[burn:].mean(axis=0)
    conductivity, capacity, h_values, _ = layout.unpack(means)
    operator = ForwardOperator(
        problem,
        config.references,
        config.solver,
        breakpoints,
        measurements.sensor_depths,
        measurements.observation_times,
    )
    try:
        predictions = operator.predict(conductivity, capacity, h_values)
    except SolverFailure as exc:
        raise PipelineError(str(exc)) from exc

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = diagnostics.residual_report(
        measurements.temperatures, predictions, measurements.noise_std
    )
    residual_csv = out_dir / "residuals.csv"
    _write_residual_csv(residual_csv, measurements, predictions)
    stats_json = out_dir / "residual_stats.json"
    io.write_summary(
        {
            "max_absolute_K": [float(v) for v in report.max_absolute],
            "max_relative_pct": [float(v) for v in report.max_relative_pct],
            "within_noise_fraction": report.within_noise_fraction,
        },
        stats_json,
    )
    _write_manifest(args, out_dir, chain.seed, started, [residual_csv, stats_json])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundheat",
        description="Ground slab heat conduction: forward runs, twin experiments "
        "and Bayesian parameter estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", required=True, help="run configuration file (INI)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--hours", action="store_true", help="input file times are in hours"
        )
        p.add_argument(
            "--celsius",
            action="store_true",
            help="input file temperatures are in degrees Celsius",
        )
        p.add_argument(
            "--filter-radiation",
            type=float,
            metavar="WINDOW_S",
            default=None,
            help="apply a centered moving average of this width (s) to the "
            "net radiation series on ingest",
        )
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override [mcmc] seed")
        p.set_defaults(argv_echo=None)

    p = sub.add_parser("forward", help="solve the forward problem")
    common(p)
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser("sensitivity", help="finite-difference sensitivity study")
    common(p)
    p.add_argument(
        "--reduced",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="emit parameter-scaled (reduced) coefficients",
    )
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("synth", help="generate synthetic twin measurements")
    common(p, seed=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="run the MCMC estimation")
    common(p, seed=True)
    p.add_argument("--data", required=True, help="measurement CSV")
    p.add_argument(
        "--mode", choices=("caseAB", "caseC"), default="caseAB", help="prior setup"
    )
    p.add_argument("--chains", type=int, default=1, help="independent seeded chains")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("diagnose", help="post-process a chain CSV")
    common(p)
    p.add_argument("--chain", required=True, help="chain CSV to analyze")
    p.add_argument("--burn-in", type=int, default=None, help="override [mcmc] burn_in")
    p.add_argument(
        "--thin", type=int, default=10000, help="target row count of trace.csv"
    )
    p.add_argument(
        "--max-lag", type=int, default=1000, help="lag cap for autocovariance.csv"
    )
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("residuals", help="residuals at a chain's posterior means")
    common(p)
    p.add_argument("--data", required=True, help="measurement CSV")
    p.add_argument("--chain", required=True, help="chain CSV")
    p.add_argument("--burn-in", type=int, default=None, help="override [mcmc] burn_in")
    p.set_defaults(func=_cmd_residuals)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "estimate" and args.chains < 1:
        parser.error("--chains must be at least 1")
    args.argv_echo = ["groundheat"] + list(argv if argv is not None else sys.argv[1:])
    try:
        return args.func(args)
    except (ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
