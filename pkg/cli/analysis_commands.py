"""
Deterministic pipeline commands: invariant density, Poisson correctors,
averaged dynamics, rate ingredients, action evaluation and minimization.
"""

import logging
from pathlib import Path
from typing import List, Optional

import click
import numpy as np

from cli.common import RunContext, common_options, float_list_option, run_command
from models.paths import AveragedPath, DeviationPath
from models.rate import RateIngredients
from schemas.run_config import EventSpec

logger = logging.getLogger(__name__)


def _columns(prefix: str, count: int) -> List[str]:
    return [f"{prefix}{k + 1}" for k in range(count)]


def _certificate(solution) -> dict:
    return {
        "method": solution.method,
        "residual_sup": solution.residual_sup,
        "residual_tolerance": solution.residual_tolerance,
        "centering_defect": solution.centering_defect,
        "certified": solution.certified,
    }


def read_deviation_path(path: str, xbar: AveragedPath) -> DeviationPath:
    """CSV with columns t, xi1..xin; '#' metadata lines and a header row are skipped"""
    file = Path(path)
    if not file.exists():
        raise click.UsageError(f"--xi-file {path} does not exist")
    lines = [line for line in file.read_text(encoding="utf-8").splitlines()
             if line.strip() and not line.lstrip().startswith("#")]
    if lines and not lines[0].lstrip()[:1].isdigit() and lines[0].lstrip()[:1] not in "+-.":
        lines = lines[1:]
    table = np.loadtxt(lines, delimiter=",", ndmin=2)
    if table.shape[1] < 2:
        raise click.UsageError(f"--xi-file {path} needs a time column and at least one deviation column")
    xi = DeviationPath(table[:, 0], table[:, 1:])
    xi.check_grid(xbar)
    return xi


# -- invariant ---------------------------------------------------------------------

@click.command("invariant")
@common_options
@float_list_option("--x", help="Frozen slow state (defaults to x0)")
@run_command("invariant")
def invariant(run: RunContext):
    """Invariant density of the fast process at a frozen slow state."""
    run.require_valid()
    model = run.model
    x = run.slow_state()
    fast_dynamics = run.container.get_fast_dynamics_service()
    density = fast_dynamics.invariant_density(model, x)
    metadata = {
        "x": x,
        "log_normalizer": density.log_normalizer,
        "mass_defect": density.mass_defect,
        "flux": density.flux,
    }
    if density.dimension == 1:
        metadata["stationarity"] = fast_dynamics.stationarity_check(density, model, x)
        header = ["y", "m"]
    else:
        header = _columns("y", density.dimension) + ["m"]
    points = density.mesh().reshape(-1, density.dimension)
    values = density.values.reshape(-1)
    rows = (list(point) + [value] for point, value in zip(points, values))
    run.artifacts.write_csv("invariant.csv", header, rows, metadata)


# -- poisson ------------------------------------------------------------------------

@click.command("poisson")
@common_options
@float_list_option("--x", help="Frozen slow state (defaults to x0)")
@run_command("poisson")
def poisson(run: RunContext):
    """
    Fluctuation corrector Phi (L Phi = -(lambda - lambda_bar)) and, in
    Regime 1, the cell solution chi (L chi = -b), with their certificates.
    """
    run.require_valid()
    model = run.model
    x = run.slow_state()
    n = model.dimensions.n
    local = run.container.get_averaging_service().local_average(model, x)
    centered = local.lambda_values - local.lambda_bar[None, :]
    phi = run.container.get_poisson_service().corrector_phi(model, x, local.density, centered, run.poisson_method)
    nodes = phi.grid.nodes

    header = ["y"] + _columns("phi", n) + _columns("dphi", n)
    rows = ([y] + list(u) + list(du) for y, u, du in zip(nodes, phi.values, phi.dy_values))
    run.artifacts.write_csv("poisson.csv", header, rows, {"x": x, **_certificate(phi)})

    if local.chi is not None:
        chi = local.chi
        header = ["y"] + _columns("chi", n) + _columns("dchi", n)
        rows = ([y] + list(u) + list(du) for y, u, du in zip(chi.grid.nodes, chi.values, chi.dy_values))
        run.artifacts.write_csv("chi.csv", header, rows, {"x": x, **_certificate(chi)})
    if not phi.certified:
        logger.warning(f"Corrector at x = {x.tolist()} is not certified (residual {phi.residual_sup:.3e})")


# -- averaged --------------------------------------------------------------------

@click.command("averaged")
@common_options
@click.option("--x-grid", help="Also tabulate lambda_bar on start:stop:count (n = 1)")
@run_command("averaged")
def averaged(run: RunContext):
    """Averaged drift lambda_bar and the averaged path X_bar on [0, 1]."""
    run.require_valid()
    model = run.model
    n = model.dimensions.n
    averaging = run.container.get_averaging_service()
    drift = averaging.averaged_drift(model)
    xbar = averaging.solve_xbar(drift, model.x0)

    header = ["t"] + _columns("xbar", n) + _columns("lambda_bar", n)
    rows = ([t] + list(value) + list(slope) for t, value, slope in zip(xbar.times, xbar.values, xbar.drift))
    metadata = {"integrator": xbar.integrator, "error_estimate": xbar.error_estimate, "jacobian": drift.method}
    run.artifacts.write_csv("xbar.csv", header, rows, metadata)
    run.artifacts.emit_plotdata(
        "xbar_plot.csv", {f"xbar{k + 1}": (xbar.times, xbar.values[:, k]) for k in range(n)}
    )

    if run.config.x_grid is not None:
        lattice = run.slow_lattice()
        values = [drift(x) for x in lattice]
        rows = ([float(x[0])] + list(value) for x, value in zip(lattice, values))
        run.artifacts.write_csv("lambda_bar.csv", ["x"] + _columns("lambda_bar", n), rows)


# -- rate ---------------------------------------------------------------------------

@click.command("rate")
@common_options
@float_list_option("--x", help="Slow state (defaults to x0)")
@click.option("--x-grid", help="Lattice start:stop:count of slow states (n = 1)")
@float_list_option("--eta", help="Deviation state for the local rate")
@float_list_option("--beta", help="Velocity for the local rate")
@run_command("rate")
def rate(run: RunContext):
    """
    kappa(x, .) = A eta + d and q(x) over a lattice of slow states; with --eta
    and --beta also the local rate and the cost of the optimal controls.
    """
    run.require_valid()
    model = run.model
    rates = run.container.get_rate_service()
    ingredients = rates.build_ingredients(model)
    eta, beta = run.vector("eta"), run.vector("beta")
    with_rate = eta is not None and beta is not None
    if (eta is None) != (beta is None):
        raise click.UsageError("--eta and --beta must be given together")

    lattice = run.slow_lattice()
    table = []
    for x in lattice:
        local = ingredients.at(x)
        row = [x, local.kappa.A.ravel(), local.kappa.d, local.q.matrix.ravel(), local.q.inverse().ravel()]
        if with_rate:
            controls = rates.optimal_controls(local, eta, beta)
            row += [local.local_rate(eta, beta), controls.cost, controls.expected_cost]
        table.append(row)
        logger.info(f"Rate ingredients at x = {x.tolist()}: q = {local.q.matrix.ravel().tolist()}")

    header = ["x", "kappa_A", "kappa_d", "q", "q_inv"]
    if with_rate:
        header += ["local_rate", "control_cost", "control_cost_expected"]
    metadata = {"regime": model.regime_index, "limit_constant": rates.limit_constant(model)}
    run.artifacts.write_csv("rate.csv", header, table, metadata)

    if model.dimensions.n == 1:
        xs = np.array([float(row[0][0]) for row in table])
        series = {
            "kappa_A": (xs, [float(row[1][0]) for row in table]),
            "kappa_d": (xs, [float(row[2][0]) for row in table]),
            "q": (xs, [float(row[3][0]) for row in table]),
        }
        run.artifacts.emit_plotdata("rate_plot.csv", series, abscissa="x")


# -- action and minimize -------------------------------------------------------------

def _rate_setup(run: RunContext):
    simulation = run.container.get_simulation_service()
    rates = run.container.get_rate_service()
    xbar = simulation.averaged_path(run.model)
    ingredients: RateIngredients = rates.build_ingredients(run.model)
    return rates, xbar, ingredients


@click.command("action")
@common_options
@click.option("--xi-file", type=click.Path(dir_okay=False), help="CSV path t, xi1..xin on the averaged-path grid")
@float_list_option("--target", help="Straight line from 0 to this endpoint")
@run_command("action")
def action(run: RunContext):
    """
    Discrete action of a deviation path: a tabulated path, a straight line to
    --target, or (by default) the zero-cost path.
    """
    run.require_valid()
    rates, xbar, ingredients = _rate_setup(run)
    target = run.vector("target")
    if run.config.xi_file:
        xi, source = read_deviation_path(run.config.xi_file, xbar), "file"
    elif target is not None:
        xi, source = DeviationPath(xbar.times, xbar.times[:, None] * target[None, :]), "line"
    else:
        xi, source = rates.zero_cost_path(ingredients, xbar), "zero_cost"
    value = rates.action_functional(ingredients, xbar, xi)
    pairs = [("action", value), ("path", source), ("steps", xbar.steps), ("endpoint", xi.values[-1])]
    run.artifacts.write_key_values("action.txt", pairs)
    click.echo(f"S = {value!r}")


@click.command("minimize")
@common_options
@float_list_option("--target", help="Endpoint xi_1")
@click.option("--event", help="Half-space event such as 'eta1>=0.5'; minimizes towards its cheapest endpoint")
@run_command("minimize")
def minimize(run: RunContext):
    """Minimal action over paths with xi_0 = 0 and a fixed endpoint, with the minimizer."""
    run.require_valid()
    rates, xbar, ingredients = _rate_setup(run)
    n = run.model.dimensions.n
    target: Optional[np.ndarray] = run.vector("target")
    event_cost = None
    if target is None:
        if not run.config.event:
            raise click.UsageError("minimize needs --target or --event")
        event = EventSpec.parse(run.config.event, n)
        target, event_cost = rates.dominant_endpoint(ingredients, xbar, event)

    xi, s_star = rates.minimize_action_endpoint(ingredients, xbar, target)
    header = ["t"] + _columns("xi", n)
    run.artifacts.write_csv("minimizer.csv", header, ([t] + list(v) for t, v in zip(xi.times, xi.values)))

    zero_cost = rates.zero_cost_path(ingredients, xbar).values[-1]
    gramian = rates.gramian(ingredients, xbar)
    shift = target - zero_cost
    pairs = [
        ("s_star", s_star),
        ("target", target),
        ("zero_cost_endpoint", zero_cost),
        ("gramian_cost", 0.5 * float(shift @ np.linalg.solve(gramian, shift))),
    ]
    if event_cost is not None:
        pairs.append(("event", run.config.event))
        pairs.append(("event_cost", event_cost))
    run.artifacts.write_key_values("minimize.txt", pairs)
    run.artifacts.emit_plotdata(
        "minimizer_plot.csv", {f"xi{k + 1}": (xi.times, xi.values[:, k]) for k in range(n)}
    )
    click.echo(f"S* = {s_star!r}")
