"""
Monte Carlo commands: path simulation, the controlled limit check and
rare-event estimation.
"""

import functools
import logging
import math
from typing import Dict, List

import click
import numpy as np

from cli.common import RunContext, common_options, float_list_option, run_command
from models.paths import PathBatch
from schemas.results import EstimatorResult
from schemas.run_config import EventSpec
from services.rate_service import event_indicator
from services.simulation_service import constant_control

logger = logging.getLogger(__name__)

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
LIMIT_CHECK_EPSILONS = [1e-2, 3e-3, 1e-3]


def simulation_options(func):
    for option in reversed([
        float_list_option("--eps", help="Scale parameter(s) epsilon"),
        click.option("--substeps", type=int, default=20, show_default=True, help="Steps per fast time unit"),
        click.option("--paths", type=int, default=1000, show_default=True),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--h", type=float, help="Override h(eps)"),
    ]):
        func = option(func)
    return func


def _suffix(index: int, count: int) -> str:
    return "" if count == 1 else f"_{index + 1}"


def _variables(batch: PathBatch) -> Dict[str, np.ndarray]:
    """(paths, records) arrays per recorded component"""
    variables = {}
    for name, values in (("x", batch.x), ("y", batch.y), ("eta", batch.eta)):
        for k in range(values.shape[2]):
            variables[f"{name}{k + 1}"] = values[:, :, k]
    return variables


def _batch_metadata(batch: PathBatch) -> dict:
    return {"epsilon": batch.epsilon, "delta": batch.delta, "h": batch.h, "dt": batch.dt, "paths": batch.path_count}


# -- simulate --------------------------------------------------------------------

@click.command("simulate")
@common_options
@simulation_options
@click.option("--record-stride", type=int, default=0, show_default=True,
              help="Keep every k-th time node (0: endpoints only)")
@float_list_option("--control", help="Constant control (u1, u2) of length 2m")
@click.option("--summary", type=click.Choice(["paths", "quantiles"]), default="quantiles", show_default=True)
@click.option("--moment-power", type=float, help="Also estimate E int |Y|^power ds across --eps")
@run_command("simulate")
def simulate(run: RunContext):
    """
    Euler-Maruyama paths of (X, Y) and the deviation eta. Writes quantile
    summaries per recorded node, or one CSV per path.
    """
    run.require_valid()
    model = run.model
    simulation = run.container.get_simulation_service()
    epsilons = run.epsilons([1e-2])
    control = run.config.control
    if control is not None and len(control) != 2 * model.dimensions.m:
        raise click.UsageError(f"--control needs {2 * model.dimensions.m} components, got {len(control)}")

    for index, epsilon in enumerate(epsilons):
        sim = run.sim_config(epsilon)
        if control is None:
            batch = simulation.simulate_uncontrolled(model, sim)
        else:
            batch = simulation.simulate_controlled(model, sim, constant_control(control))
        suffix = _suffix(index, len(epsilons))
        metadata = _batch_metadata(batch)
        if control is not None:
            weights = batch.weights
            metadata["weight_mean"] = float(np.mean(weights))
            metadata["control_energy_mean"] = float(np.mean(batch.control_energy))
        variables = _variables(batch)
        if run.config.summary == "quantiles":
            _write_quantiles(run, f"simulate{suffix}.csv", batch, variables, metadata)
        else:
            _write_paths(run, suffix, batch, variables, metadata)

    if run.config.moment_power is not None:
        diagnostic = simulation.y_moment_diagnostic(model, run.sim_config(epsilons[0]),
                                                    run.config.moment_power, epsilons)
        pairs = [("power", diagnostic.power), ("slope", diagnostic.slope), ("flagged", diagnostic.flagged)]
        for epsilon, estimate, error in zip(diagnostic.epsilons, diagnostic.estimates, diagnostic.std_errors):
            pairs.append((f"eps.{epsilon!r}.estimate", estimate))
            pairs.append((f"eps.{epsilon!r}.std_error", error))
        run.artifacts.write_key_values("moments.txt", pairs)
        if diagnostic.flagged:
            logger.warning(f"Moments of |Y|^{diagnostic.power} grow as eps decreases (slope {diagnostic.slope:.3f})")


def _write_quantiles(run: RunContext, name: str, batch: PathBatch, variables: Dict[str, np.ndarray], metadata: dict):
    header = ["t", "variable", "mean"] + [f"q{int(round(100 * level)):02d}" for level in QUANTILES]

    def rows():
        for slot, t in enumerate(batch.times):
            for label, values in variables.items():
                column = values[:, slot]
                yield [t, label, float(np.mean(column))] + list(np.quantile(column, QUANTILES))

    run.artifacts.write_csv(name, header, rows(), metadata)


def _write_paths(run: RunContext, suffix: str, batch: PathBatch, variables: Dict[str, np.ndarray], metadata: dict):
    header = ["t"] + list(variables)
    for path in range(batch.path_count):
        rows = ([t] + [values[path, slot] for values in variables.values()] for slot, t in enumerate(batch.times))
        run.artifacts.write_csv(f"path{suffix}_{path:05d}.csv", header, rows,
                                {**metadata, "log_weight": batch.log_weights[path]})


# -- limit-check ---------------------------------------------------------------------

@click.command("limit-check")
@common_options
@simulation_options
@float_list_option("--control", help="Constant control (u1, u2) of length 2m; defaults to the first unit vector")
@run_command("limit-check")
def limit_check(run: RunContext):
    """
    Mean controlled deviation at t = 1 against the averaged controlled limit
    as eps decreases.
    """
    run.require_valid()
    model = run.model
    m = model.dimensions.m
    control = run.config.control
    if control is None:
        control = [1.0] + [0.0] * (2 * m - 1)
    elif len(control) != 2 * m:
        raise click.UsageError(f"--control needs {2 * m} components, got {len(control)}")
    epsilons = run.epsilons(LIMIT_CHECK_EPSILONS)
    ingredients = run.container.get_rate_service().build_ingredients(model)
    report = run.container.get_simulation_service().controlled_limit_check(
        model, ingredients, control, epsilons, run.sim_config(epsilons[0])
    )
    run.artifacts.write_key_values("limit_check.txt", report.key_values())
    run.artifacts.emit_plotdata("limit_check_plot.csv", {"gap": (epsilons, report.gaps)}, abscissa="eps")
    click.echo(f"limit check {'passed' if report.passed else 'did not pass'}: gaps {report.gaps}")


# -- estimate ---------------------------------------------------------------------------

@click.command("estimate")
@common_options
@simulation_options
@click.option("--event", help="Endpoint event such as 'eta1>=0.5' or '1,-1.eta<=0'")
@click.option("--method", type=click.Choice(["plain", "is", "both"]), default="both", show_default=True)
@click.option("--weights", is_flag=True, help="Write per-path importance weights")
@run_command("estimate")
def estimate(run: RunContext):
    """
    Probability of an endpoint event for the deviation process, by plain
    Monte Carlo and/or importance sampling under the optimal feedback control.
    """
    run.require_valid()
    model = run.model
    config = run.config
    if not config.event:
        raise click.UsageError("estimate needs --event")
    event = EventSpec.parse(config.event, model.dimensions.n)
    simulation = run.container.get_simulation_service()
    rare_events = run.container.get_rare_event_service()
    rates = run.container.get_rate_service()
    xbar = simulation.averaged_path(model)
    ingredients = rates.build_ingredients(model)
    _, s_star = rates.dominant_endpoint(ingredients, xbar, event)
    epsilons = run.epsilons([0.05])

    pairs: List = [("event", event.text()), ("s_star", s_star)]
    trend: Dict[str, tuple] = {}
    for index, epsilon in enumerate(epsilons):
        sim = run.sim_config(epsilon)
        results: List[EstimatorResult] = []
        if config.method in ("plain", "both"):
            results.append(rare_events.estimate_plain(model, sim, event, xbar))
        if config.method in ("is", "both"):
            on_batch = None
            if config.weights:
                on_batch = functools.partial(_write_weights, run, f"weights{_suffix(index, len(epsilons))}.csv", event)
            results.append(rare_events.estimate_is(model, sim, event, ingredients, xbar, on_batch))

        prefix = f"eps.{epsilon!r}"
        for result in results:
            if run.unvalidated:
                result = result.model_copy(update={"unvalidated": True})
            pairs.extend((f"{prefix}.{key}", value) for key, value in result.key_values())
            if result.log_asymptote is not None and s_star > 0:
                xs, ys = trend.setdefault(f"ratio_{result.method}", ([], []))
                xs.append(epsilon)
                ys.append(result.log_asymptote / s_star)
            click.echo(f"eps={epsilon!r} {result.method}: {result.estimate:.6g} "
                       f"[{result.ci_low:.6g}, {result.ci_high:.6g}]")
        if len(results) == 2:
            pairs.append((f"{prefix}.intervals_overlap", results[0].overlaps(results[1])))
            if results[0].std_error > 0:
                pairs.append((f"{prefix}.std_error_ratio", results[1].std_error / results[0].std_error))
        pairs.append((f"{prefix}.mdp_approx", math.exp(-results[0].h ** 2 * s_star)))

    run.artifacts.write_key_values("estimate.txt", pairs)
    if trend:
        run.artifacts.emit_plotdata("estimate_trend.csv", trend, abscissa="eps")


def _write_weights(run: RunContext, name: str, event: EventSpec, batch: PathBatch):
    hits = event_indicator(event, batch.final_eta)
    rows = (
        [path, batch.log_weights[path], weight, bool(hit)]
        for path, (weight, hit) in enumerate(zip(batch.weights, hits))
    )
    run.artifacts.write_csv(name, ["path", "log_weight", "weight", "hit"], rows, _batch_metadata(batch))
