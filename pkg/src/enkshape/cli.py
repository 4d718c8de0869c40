"""Command-line interface for matching runs and batch studies.

All numeric flags default to the reference operating point (50 iterations,
15 time steps, xi=1, tau=1, tolerance 1e-5).  Any flag can also be supplied
through ``--config FILE``: a JSON object whose keys are the flag names with
underscores (``{"iterations": 20, "ensemble_size": 10}``); explicit
command-line flags win over the file.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from .enkf import MatchConfig, enkf_match
from .experiments import (
    ExperimentPlan,
    RunRecord,
    emit_outputs,
    run_regularisation_study,
    run_robustness_study,
)
from .outputs import read_landmarks, write_geodesic_path, write_landmarks
from .shooting import BlowUpError, forward, shoot
from .synthetic import SynthSpec, make_initial_ensemble, make_target


def _apply_config(ctx: click.Context, values: dict) -> dict:
    """Overlay JSON-config values onto defaulted parameters.

    A key from the config file is used only when the corresponding flag was
    not given on the command line; unknown keys are ignored so one file can
    serve several subcommands.
    """
    config_path = values.pop("config", None)
    if not config_path:
        return values
    data = json.loads(Path(config_path).read_text())
    if not isinstance(data, dict):
        raise click.UsageError(f"{config_path}: config must be a JSON object")
    merged = dict(values)
    for key, value in data.items():
        if key in merged and ctx.get_parameter_source(key) == ParameterSource.DEFAULT:
            merged[key] = tuple(value) if isinstance(value, list) else value
    return merged


def _core_options(fn):
    options = [
        click.option("--iterations", type=int, default=50, show_default=True,
                     help="Kalman iteration budget."),
        click.option("--timesteps", type=int, default=15, show_default=True,
                     help="Forward-Euler steps of the geodesic integrator."),
        click.option("--tau", type=float, default=1.0, show_default=True,
                     help="Gaussian kernel width."),
        click.option("--tol", type=float, default=1e-5, show_default=True,
                     help="Stop once the misfit norm falls below this."),
        click.option("--seed", type=int, default=0, show_default=True,
                     help="Base seed; all randomness derives from it."),
        click.option("--out", type=click.Path(file_okay=False), default="enkshape-out",
                     show_default=True, help="Output directory."),
        click.option("--threads", type=int, default=0, show_default=True,
                     help="Worker threads for ensemble shooting (0 = auto)."),
        click.option("--config", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="JSON file of flag values."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
def main():
    """Diffeomorphic landmark matching by ensemble Kalman inversion."""


@main.command("make-target")
@click.option("--landmarks", type=int, default=50, show_default=True,
              help="Number of landmarks on the unit-circle template.")
@click.option("--std", type=float, default=1.0, show_default=True,
              help="Standard deviation of the true momentum draw.")
@_core_options
@click.pass_context
def make_target_cmd(ctx, **values):
    """Generate a synthetic template/target pair and its true momentum."""
    args = _apply_config(ctx, values)
    out = Path(args["out"])
    out.mkdir(parents=True, exist_ok=True)
    config = MatchConfig(iterations=args["iterations"], time_steps=args["timesteps"],
                         tau=args["tau"], tolerance=args["tol"])
    spec = SynthSpec(n_landmarks=args["landmarks"], ensemble_size=2,
                     seed=args["seed"], target_momentum_std=args["std"])
    try:
        template, target, momentum = make_target(spec, config)
    except BlowUpError as exc:
        click.echo(f"target generation failed: {exc}", err=True)
        sys.exit(1)
    for name, points in (("template", template), ("target", target),
                         ("true_momentum", momentum)):
        click.echo(f"wrote {write_landmarks(out / f'{name}.csv', points)}")
    sys.exit(0)


@main.command("match")
@click.option("--template", "template_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Template landmark CSV (header x0,...,x{d-1}).")
@click.option("--target", "target_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Target landmark CSV, rows matching the template.")
@click.option("--ensemble-size", type=int, default=50, show_default=True,
              help="Number of momentum ensemble members.")
@click.option("--xi", type=float, default=1.0, show_default=True,
              help="Kalman gain regularisation.")
@_core_options
@click.pass_context
def match_cmd(ctx, **values):
    """Match a template landmark file onto a target landmark file."""
    args = _apply_config(ctx, values)
    try:
        template = read_landmarks(args["template_path"])
        target = read_landmarks(args["target_path"])
    except ValueError as exc:
        click.echo(f"match failed: {exc}", err=True)
        sys.exit(1)
    config = MatchConfig(iterations=args["iterations"], time_steps=args["timesteps"],
                         xi=args["xi"], tau=args["tau"], tolerance=args["tol"])
    spec = SynthSpec(
        n_landmarks=template.shape[0], ensemble_size=args["ensemble_size"],
        seed=args["seed"], dim=template.shape[1],
    )
    record = RunRecord(
        name="match", study="single",
        n_landmarks=template.shape[0], ensemble_size=args["ensemble_size"],
        xi=args["xi"], target_index=0, repeat=0,
        target_seed=-1,  # target came from a file, not a seed
        ensemble_seed=args["seed"], config=config,
        template=template, target=target,
    )
    try:
        result = enkf_match(template, target, make_initial_ensemble(spec), config,
                            threads=args["threads"])
    except (ValueError, BlowUpError, np.linalg.LinAlgError) as exc:
        record.status = "error"
        record.error = f"{type(exc).__name__}: {exc}"
        emit_outputs([record], args["out"])
        click.echo(f"match failed: {exc}", err=True)
        sys.exit(1)
    record.misfits = result.trace.values
    record.converged = result.trace.converged
    record.iterations_run = result.trace.iterations_run
    record.timings = result.timings
    record.mean_momentum = result.mean_momentum
    record.matched = forward(template, result.mean_momentum, config.time_steps,
                             config.tau)
    written = emit_outputs([record], args["out"])
    path = shoot(template, result.mean_momentum, config.time_steps, config.tau)
    written.append(write_geodesic_path(Path(args["out"]) / "match_path.csv", path))
    for item in written:
        click.echo(f"wrote {item}")
    click.echo(
        f"iterations={result.trace.iterations_run} "
        f"misfit={result.trace.values[-1]:.6e} converged={result.trace.converged}"
    )
    sys.exit(0)


def _finish_study(records) -> None:
    ok = [r for r in records if r.status == "ok"]
    click.echo(f"{len(ok)}/{len(records)} runs completed "
               f"({sum(r.converged for r in ok)} converged)")
    for record in records:
        if record.status != "ok":
            click.echo(f"  failed: {record.name}: {record.error}", err=True)
    sys.exit(1 if not ok else 0)


@main.command("study-xi")
@click.option("--m", type=int, default=50, show_default=True,
              help="Landmark count.")
@click.option("--ensemble-size", type=int, default=50, show_default=True,
              help="Ensemble size.")
@click.option("--xi", type=float, multiple=True, default=(0.1, 1.0, 10.0),
              show_default=True, help="Regularisation values to sweep.")
@click.option("--targets", type=int, default=3, show_default=True,
              help="Number of seeded targets.")
@_core_options
@click.pass_context
def study_xi_cmd(ctx, **values):
    """Regularisation sweep: one run per (target, xi) on shared ensembles."""
    args = _apply_config(ctx, values)
    plan = ExperimentPlan(
        study="regularisation",
        m_values=(args["m"],),
        ensemble_sizes=(args["ensemble_size"],),
        xi_values=tuple(args["xi"]),
        n_targets=args["targets"],
        base_seed=args["seed"],
        config=MatchConfig(iterations=args["iterations"], time_steps=args["timesteps"],
                           tau=args["tau"], tolerance=args["tol"]),
        output_dir=Path(args["out"]),
        threads=args["threads"],
    )
    _finish_study(run_regularisation_study(plan))


@main.command("study-robustness")
@click.option("--m", type=int, multiple=True, default=(10, 50, 150),
              show_default=True, help="Landmark counts to sweep.")
@click.option("--ensemble-size", type=int, multiple=True, default=(10, 50, 100),
              show_default=True, help="Ensemble sizes to sweep.")
@click.option("--xi", type=float, default=1.0, show_default=True,
              help="Regularisation (fixed).")
@click.option("--repeats", type=int, default=20, show_default=True,
              help="Independent ensemble draws per cell.")
@click.option("--targets", type=int, default=3, show_default=True,
              help="Number of seeded targets.")
@_core_options
@click.pass_context
def study_robustness_cmd(ctx, **values):
    """Robustness grid: landmark count vs ensemble size, many draws."""
    args = _apply_config(ctx, values)
    plan = ExperimentPlan(
        study="robustness",
        m_values=tuple(args["m"]),
        ensemble_sizes=tuple(args["ensemble_size"]),
        xi_values=(args["xi"],),
        repeats=args["repeats"],
        n_targets=args["targets"],
        base_seed=args["seed"],
        config=MatchConfig(iterations=args["iterations"], time_steps=args["timesteps"],
                           tau=args["tau"], tolerance=args["tol"]),
        output_dir=Path(args["out"]),
        threads=args["threads"],
    )
    _finish_study(run_robustness_study(plan))


if __name__ == "__main__":
    main()
