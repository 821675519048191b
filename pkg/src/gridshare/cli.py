"""Command-line driver.

Subcommands: ``synth`` (generate a scenario file), ``check`` (validate
only), ``solve`` (baseline + game + emission), ``certify`` (re-verify an
emitted result with the independent finer deviation oracle).

Exit codes: 0 success / converged, 2 non-converged (report still written,
or certification failed), 1 input error.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from .decisions import Schedule
from .engine import GameConfig, deviation_gain
from .errors import GridShareError, ScenarioValidationError
from .report import emit, run
from .scenario import SynthShape, load_scenario, save_scenario, synth_scenario


@click.group()
def main():
    """Day-ahead battery and energy-sharing scheduling for prosumer communities."""


def _load(path):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        click.echo("error: scenario file not found: %s" % path, err=True)
        sys.exit(1)
    except ScenarioValidationError as exc:
        click.echo("scenario invalid:", err=True)
        for problem in exc.problems:
            click.echo("  - %s" % problem, err=True)
        sys.exit(1)


@main.command()
@click.option("--households", "-M", default=4, show_default=True)
@click.option("--intervals", "-T", default=24, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--demand-peak", default=1.4, show_default=True, help="peak demand power, kW")
@click.option("--re-peak", default=1.2, show_default=True, help="peak RE power, kW")
@click.option("--solar-fraction", default=0.5, show_default=True)
@click.option(
    "--generation-ratio",
    default=1.0,
    show_default=True,
    help="total UC generation relative to the community's positive net demand",
)
@click.option("--p0", default=0.01, show_default=True, help="base price, cost/kWh")
def synth(households, intervals, seed, out, demand_peak, re_peak, solar_fraction, generation_ratio, p0):
    """Generate a reproducible synthetic scenario file."""
    try:
        scenario = synth_scenario(
            households,
            intervals,
            seed,
            SynthShape(
                demand_peak=demand_peak,
                re_peak=re_peak,
                solar_fraction=solar_fraction,
                generation_ratio=generation_ratio,
                p0=p0,
            ),
        )
    except GridShareError as exc:
        click.echo("error: %s" % exc, err=True)
        sys.exit(1)
    save_scenario(scenario, out)
    click.echo("wrote %s (M=%d, T=%d, seed=%d)" % (out, households, intervals, seed))


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
def check(scenario_path):
    """Validate a scenario file; list every violation."""
    scenario = _load(scenario_path)
    click.echo(
        "ok: %d households, T=%d, digest %s"
        % (scenario.n_households, scenario.horizon, scenario.digest()[:12])
    )


def _config_options(fn):
    options = [
        click.option("--epsilon", default=1e-6, show_default=True),
        click.option("--max-sweeps", default=100, show_default=True),
        click.option("--soc-grid", default=64, show_default=True),
        click.option("--action-grid", default=9, show_default=True),
        click.option("--seed", default=0, show_default=True),
        click.option("--cold-start", is_flag=True, default=False),
        click.option("--terminal-soc-min", default=None, type=float),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--baseline-only", is_flag=True, default=False)
@_config_options
def solve(scenario_path, out, baseline_only, epsilon, max_sweeps, soc_grid, action_grid, seed, cold_start, terminal_soc_min):
    """Solve baseline and game, emit result.json / traces.csv / summary.txt."""
    scenario = _load(scenario_path)
    config = GameConfig(
        epsilon=epsilon,
        max_sweeps=max_sweeps,
        soc_grid=soc_grid,
        action_grid=action_grid,
        seed=seed,
        cold_start=cold_start,
        terminal_soc_min=terminal_soc_min,
    )
    try:
        report = run(scenario, config, baseline_only=baseline_only)
    except GridShareError as exc:
        click.echo("error: %s" % exc, err=True)
        sys.exit(1)
    paths = emit(report, out)
    click.echo(paths["summary"].read_text().rstrip())
    if report.equilibrium is not None and not report.equilibrium.converged:
        sys.exit(2)


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--result", "result_path", required=True, type=click.Path())
@click.option("--epsilon", default=None, type=float, help="override the run's epsilon")
def certify(scenario_path, result_path, epsilon):
    """Re-verify an emitted result with the finer deviation-gain oracle."""
    import json

    scenario = _load(scenario_path)
    try:
        with open(result_path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo("error: cannot read result document: %s" % exc, err=True)
        sys.exit(1)
    game = doc.get("game")
    if not game:
        click.echo("error: result document has no game section", err=True)
        sys.exit(1)
    if doc.get("scenario_digest") != scenario.digest():
        click.echo("error: scenario digest mismatch with result document", err=True)
        sys.exit(1)
    cfg = doc["config"]
    config = GameConfig(**{k: cfg[k] for k in cfg})
    eps = epsilon if epsilon is not None else config.epsilon
    schedules = []
    for h in scenario.households:
        entry = game["households"][h.id]
        schedules.append(Schedule(np.array(entry["a"]), np.array(entry["e"])))
    ok = True
    for m, h in enumerate(scenario.households):
        gain = deviation_gain(scenario, schedules, m, config)
        status = "PASS" if gain <= eps + 1e-9 else "FAIL"
        ok = ok and status == "PASS"
        click.echo("%s deviation_gain=%.3g (eps=%.3g) %s" % (h.id, gain, eps, status))
    if not ok:
        sys.exit(2)
    click.echo("certified: no household can gain more than %.3g" % eps)


if __name__ == "__main__":
    main()
