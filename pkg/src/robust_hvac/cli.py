"""Command-line entry point.

Errors exit nonzero and print ``{"error": <category>, "message": ...}`` on
stderr. ``--config FILE`` (YAML, one mapping per subcommand) supplies option
values in place of the built-in defaults; options given on the command line
take precedence over the file.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .config import _LINE, _LineLoader, load_building
from .errors import ConfigError, NumericError, RobustHvacError
from .market import (
    PERIODS_PER_DAY,
    PriceShape,
    WeatherShape,
    load_curtailment_csv,
    load_forecast_csv,
    load_price_csv,
    synthesize_forecast,
    synthesize_prices,
    write_forecast_csv,
    write_price_csv,
)
from .reports import emit_reports
from .sim import REALIZATIONS, accounting, run_closed_loop, run_ppp_sweep, scenario
from .thermal import check_continuous, time_constants


def _fail(category: str, message: str, code: int):
    click.echo(json.dumps({"error": category, "message": message}), err=True)
    sys.exit(code)


class _Cli(click.Group):
    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            _fail("usage", exc.format_message(), exc.exit_code)
        except click.Abort:
            _fail("aborted", "aborted", 1)
        except RobustHvacError as exc:
            _fail(exc.category, str(exc), exc.exit_code)
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else 0)


def _load_run_config(path: Path, commands) -> dict:
    try:
        doc = yaml.load(path.read_text(), Loader=_LineLoader)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror or exc}", path=path) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", mark.line + 1 if mark else None, path) from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping of subcommand -> options", 1, path)
    out = {}
    for name, opts in doc.items():
        if name == _LINE:
            continue
        if name not in commands:
            raise ConfigError(f"unknown subcommand {name!r}", doc[_LINE], path)
        if not isinstance(opts, dict):
            raise ConfigError(f"options for {name!r} must be a mapping", doc[_LINE], path)
        known = {p.name for p in commands[name].params}
        clean = {}
        for key, value in opts.items():
            if key == _LINE:
                continue
            norm = key.replace("-", "_")
            if norm not in known:
                raise ConfigError(f"unknown option {key!r} for {name!r}", opts[_LINE], path)
            clean[norm] = value
        out[name] = clean
    return out


@click.group(cls=_Cli)
@click.option("--config", "config_file", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="YAML file with per-subcommand option values.")
@click.pass_context
def cli(ctx: click.Context, config_file: Path | None):
    """Robust MPC for building HVAC: simulation, PPP sweeps and data tools."""
    if config_file is not None:
        ctx.default_map = _load_run_config(config_file, cli.commands)


def _data_options(f):
    opts = [
        click.option("--building", type=click.Path(dir_okay=False, path_type=Path), default=None,
                     help="Building YAML; defaults to the shipped building."),
        click.option("--prices", type=click.Path(dir_okay=False, path_type=Path), default=None,
                     help="Price CSV; synthesized from --seed when omitted."),
        click.option("--forecast", type=click.Path(dir_okay=False, path_type=Path), default=None,
                     help="Forecast CSV; synthesized from --seed when omitted."),
        click.option("--curtailment", type=click.Path(dir_okay=False, path_type=Path), default=None,
                     help="Curtailment CSV (timestamp,called); Bernoulli draws when omitted."),
        click.option("--days", type=click.IntRange(min=1), default=2, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--horizon", type=click.IntRange(min=1), default=None,
                     help="Prediction horizon; defaults to the building file."),
        click.option("--fraction", type=click.FloatRange(min=0), default=0.5, show_default=True,
                     help="Uncertainty half-width as a fraction of the forecast."),
        click.option("--realization", type=click.Choice(REALIZATIONS), default="uniform", show_default=True),
        click.option("--curtailment-probability", type=click.FloatRange(0, 1), default=0.1, show_default=True),
        click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _inputs(building_path, prices_path, forecast_path, curtailment_path, days, seed, horizon):
    building = load_building(building_path)
    N = horizon or building.controller.horizon
    span_days = days + math.ceil(N / PERIODS_PER_DAY)
    rooms = [r.id for r in building.thermal.network.rooms]
    prices = load_price_csv(prices_path) if prices_path else synthesize_prices(PriceShape(days=span_days), seed)
    forecast = (
        load_forecast_csv(forecast_path) if forecast_path
        else synthesize_forecast(rooms, WeatherShape(days=span_days), seed)
    )
    curtailment = load_curtailment_csv(curtailment_path)[1] if curtailment_path else None
    return building, N, prices, forecast, curtailment


def _spec(label, building, N, days, seed, fraction, realization, prob, **extra):
    return scenario(
        label,
        horizon=N,
        days=days,
        disturbance_seed=seed,
        curtailment_seed=seed + 1,
        uncertainty_fraction=fraction,
        realization=realization,
        curtailment_probability=prob,
        reserve=building.controller.reserve,
        rho=building.controller.rho,
        **extra,
    )


@cli.command()
@click.option("--scenario", "label", type=click.Choice(["a", "b", "c"]), default="b", show_default=True)
@click.option("--phi", type=click.FloatRange(min=0), default=None, help="Override the scenario's peak penalty.")
@click.option("--baseline/--no-baseline", default=False,
              help="Also run scenario (a) with the same seeds and report deltas against it.")
@_data_options
def simulate(label, phi, baseline, building, prices, forecast, curtailment, days, seed, horizon, fraction,
             realization, curtailment_probability, out):
    """Run one closed-loop scenario and write trace, figure and accounting CSVs."""
    bld, N, px, fc, curt = _inputs(building, prices, forecast, curtailment, days, seed, horizon)
    extra = {} if phi is None else {"ppp": phi}
    spec = _spec(label, bld, N, days, seed, fraction, realization, curtailment_probability, **extra)
    trace = run_closed_loop(spec, bld, px, fc, curt)
    base_report = None
    if baseline:
        base_spec = _spec("a", bld, N, days, seed, fraction, realization, curtailment_probability)
        base_report = accounting(run_closed_loop(base_spec, bld, px, fc, curt))
    report = accounting(trace, base_report)
    files = emit_reports(trace, out) + emit_reports(report, out)
    summary = {
        "scenario": label,
        "steps": len(trace),
        "cost": trace.total_cost,
        "revenue": trace.total_revenue,
        "net_cost": trace.net_cost,
        "peak_kw": trace.peak_power,
        "violations": int(trace.violations().sum()),
        "max_slack": float(trace.eps_max.max()),
        "deltas_pct": report.deltas(),
        "files": [str(f) for f in files],
    }
    click.echo(json.dumps(summary, indent=2))


@cli.command()
@click.option("--phi-min", type=click.FloatRange(min=0), default=0.5, show_default=True)
@click.option("--phi-max", type=click.FloatRange(min=0), default=30.0, show_default=True)
@click.option("--phi-steps", type=click.IntRange(min=1), default=12, show_default=True)
@click.option("--spacing", type=click.Choice(["log", "linear"]), default="log", show_default=True)
@click.option("--knee-fraction", type=click.FloatRange(0, 1), default=0.1, show_default=True,
              help="Knee: later slopes stay below this fraction of the steepest peak drop.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@_data_options
def sweep(phi_min, phi_max, phi_steps, spacing, knee_fraction, workers, building, prices, forecast, curtailment,
          days, seed, horizon, fraction, realization, curtailment_probability, out):
    """Sweep the peak-power penalty with shared seeds and write sweep CSVs."""
    if phi_max < phi_min:
        raise click.BadParameter("--phi-max must be >= --phi-min")
    if spacing == "log" and phi_min > 0:
        grid = np.geomspace(phi_min, phi_max, phi_steps)
    else:
        grid = np.linspace(phi_min, phi_max, phi_steps)
    bld, N, px, fc, curt = _inputs(building, prices, forecast, curtailment, days, seed, horizon)
    base = _spec("c", bld, N, days, seed, fraction, realization, curtailment_probability)
    result = run_ppp_sweep(base, grid, bld, px, fc, curt, knee_fraction=knee_fraction, max_workers=workers)
    files = emit_reports(result, out)
    click.echo(json.dumps({
        "phi": result.phi.tolist(),
        "cost": result.cost.tolist(),
        "peak": result.peak.tolist(),
        "knee": result.knee,
        "files": [str(f) for f in files],
    }, indent=2))


@cli.command("check-model")
@click.option("--building", type=click.Path(dir_okay=False, path_type=Path), default=None)
def check_model(building):
    """Load a building and run the model invariant diagnostics."""
    bld = load_building(building)
    model = bld.thermal
    problems = check_continuous(model.continuous)
    radius = float(np.max(np.abs(np.linalg.eigvals(model.discrete.A))))
    if not radius < 1:
        problems.append(f"discrete spectral radius {radius:.6g} is not < 1")
    tau = time_constants(model.continuous)
    report = {
        "building": bld.source,
        "states": list(model.network.node_ids),
        "dt_h": model.discrete.dt,
        "time_constants_h": [float(t) for t in tau],
        "spectral_radius": radius,
        "problems": problems,
    }
    click.echo(json.dumps(report, indent=2))
    if problems:
        raise NumericError("; ".join(problems))


@cli.command("synth-prices")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--days", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--start", default=PriceShape.start, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def synth_prices(seed, days, start, out):
    """Write a synthetic half-hourly energy/reserve price CSV."""
    path = write_price_csv(synthesize_prices(PriceShape(days=days, start=start), seed), out)
    click.echo(str(path))


@cli.command("synth-forecast")
@click.option("--building", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--days", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--start", default=WeatherShape.start, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def synth_forecast(building, seed, days, start, out):
    """Write a synthetic disturbance forecast CSV for the building's rooms."""
    rooms = [r.id for r in load_building(building).thermal.network.rooms]
    path = write_forecast_csv(synthesize_forecast(rooms, WeatherShape(days=days, start=start), seed), out)
    click.echo(str(path))


def main():
    cli(prog_name="robust-hvac")


if __name__ == "__main__":
    main()
