"""
Shared plumbing for the subcommands: common options, resolution of the run
configuration (defaults < --config file < explicit flags), model loading,
the condition gate and the run manifest.
"""

import dataclasses
import functools
import logging
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from pydantic import ValidationError as SchemaValidationError

from core.config import Settings, get_settings
from core.dependencies_container import DependencyContainer
from exceptions.model_exceptions import ConditionCheckFailed
from models.slow_fast_model import SlowFastModel
from repositories.artifact_repository import ArtifactRepository
from repositories.model_repository import read_toml
from schemas.reports import ConditionReport
from schemas.run_config import RunConfig, SimConfig, parse_grid

logger = logging.getLogger(__name__)


# -- option parsing -------------------------------------------------------------

def parse_floats(ctx, param, value: Optional[str]) -> Optional[List[float]]:
    """Comma-separated floats"""
    if value is None:
        return None
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def parse_overrides(ctx, param, values: Tuple[str, ...]) -> Dict[str, float]:
    """Repeated KEY=VALUE pairs"""
    overrides: Dict[str, float] = {}
    for item in values or ():
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}")
        try:
            overrides[key.strip()] = float(raw)
        except ValueError:
            raise click.BadParameter(f"value of {key.strip()} is not a number: {raw!r}")
    return overrides


def common_options(func: Callable) -> Callable:
    """Options shared by every subcommand"""
    options = [
        click.option("--config", "config_file", type=click.Path(dir_okay=False),
                     help="TOML run configuration, e.g. a previous manifest.txt"),
        click.option("--model", default="example1", show_default=True,
                     help="Builtin name (example1, example2, example3) or 'custom'"),
        click.option("--model-file", type=click.Path(dir_okay=False), help="TOML model file for --model custom"),
        click.option("--regime", type=click.IntRange(1, 2), help="Regime for builtins offering both"),
        click.option("--set", "overrides", multiple=True, callback=parse_overrides, metavar="KEY=VALUE",
                     help="Model parameter override (repeatable)"),
        click.option("--force", is_flag=True, help="Run despite a failed condition report; outputs are stamped"),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--out", "output_dir", default="out", show_default=True, help="Output directory"),
        click.option("--grid-nodes", type=int, help="Fast-variable grid nodes"),
        click.option("--half-width", type=float, help="Truncation of line / half-line fast spaces"),
        click.option("--stencil-order", type=int, help="Finite-difference order (2 or 4)"),
        click.option("--path-nodes", type=int, help="Time nodes of the averaged path"),
        click.option("--solver", type=click.Choice(["auto", "quadrature", "fd"]), default="auto", show_default=True),
        click.option("--r", type=float, help="Override the declared recurrence exponent"),
        click.option("--qb", type=float, help="Override the declared growth exponent of b"),
        click.option("--qc", type=float, help="Override the declared growth exponent of c"),
        click.option("--qsigma", type=float, help="Override the declared growth exponent of sigma"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def float_list_option(*names: str, **kwargs) -> Callable:
    return click.option(*names, callback=parse_floats, metavar="V1,V2,...", **kwargs)


# -- run context --------------------------------------------------------------------

class RunContext:
    """
    Everything a subcommand needs: the resolved RunConfig, tuned settings,
    the dependency container, the model and an artifact writer.
    """

    def __init__(self, config: RunConfig, settings: Optional[Settings] = None):
        self.config = config
        self.settings = settings or get_settings()
        self._apply_numerics()
        self.poisson_method: Optional[str] = None if config.solver == "auto" else config.solver
        self.container = DependencyContainer(self.settings, self.poisson_method, allow_uncertified=config.force)
        self.artifacts: ArtifactRepository = self.container.get_artifact_repository(
            config.output_dir, command=config.command, model=config.model
        )
        self._model: Optional[SlowFastModel] = None
        self.unvalidated = False

    @classmethod
    def from_click(cls, command: str, params: Dict[str, Any]) -> "RunContext":
        """Merge defaults, the --config document and explicitly given flags"""
        ctx = click.get_current_context()
        params = dict(params)
        config_file = params.pop("config_file", None)
        values: Dict[str, Any] = {}
        explicit: Dict[str, Any] = {}
        for name, value in params.items():
            source = ctx.get_parameter_source(name)
            if source in (click.core.ParameterSource.COMMANDLINE, click.core.ParameterSource.ENVIRONMENT):
                explicit[name] = value
            elif value is not None and value != () and value != {}:
                values[name] = value
        if config_file:
            document = read_toml(config_file)
            document.pop("command", None)
            values.update(document)
        values.update(explicit)
        values["command"] = command
        try:
            config = RunConfig(**values)
        except SchemaValidationError as exc:
            first = exc.errors()[0]
            location = ".".join(str(part) for part in first.get("loc", ()))
            raise click.UsageError(f"invalid option {location or 'value'}: {first['msg']}")
        return cls(config)

    def _apply_numerics(self):
        numerics, config = self.settings.numerics, self.config
        if config.grid_nodes is not None:
            numerics.grid_nodes = config.grid_nodes
        if config.half_width is not None:
            numerics.line_half_width = config.half_width
            numerics.half_line_upper = config.half_width
        if config.stencil_order is not None:
            numerics.stencil_order = config.stencil_order
        if config.path_nodes is not None:
            numerics.path_nodes = config.path_nodes

    # -- model -------------------------------------------------------------------

    @property
    def model(self) -> SlowFastModel:
        if self._model is None:
            self._model = self._load_model()
        return self._model

    def _load_model(self) -> SlowFastModel:
        config = self.config
        repository = self.container.get_model_repository()
        if config.model == "custom":
            model = repository.load_file(config.model_file, config.overrides)
        else:
            model = repository.get(config.model, config.regime, config.overrides)
        updates = {
            field: value for field, value in (
                ("r", config.r), ("q_b", config.qb), ("q_c", config.qc), ("q_sigma", config.qsigma)
            ) if value is not None
        }
        if updates:
            exponents = model.exponents.model_copy(update=updates)
            model = dataclasses.replace(model, exponents=exponents)
        return model

    def slow_state(self) -> np.ndarray:
        """--x, or the model's initial slow state"""
        if self.config.x is None:
            return self.model.x0
        x = np.asarray(self.config.x, dtype=float)
        if x.size != self.model.dimensions.n:
            raise click.UsageError(f"--x needs {self.model.dimensions.n} components, got {x.size}")
        return x

    def slow_lattice(self) -> List[np.ndarray]:
        """--x-grid start:stop:count for n = 1, else the single state of slow_state()"""
        if self.config.x_grid is None:
            return [self.slow_state()]
        if self.model.dimensions.n != 1:
            raise click.UsageError("--x-grid is only available for one-dimensional slow variables")
        try:
            return [np.array([value]) for value in parse_grid(self.config.x_grid)]
        except ValueError as exc:
            raise click.UsageError(str(exc))

    def vector(self, name: str) -> Optional[np.ndarray]:
        value = getattr(self.config, name)
        if value is None:
            return None
        vector = np.asarray(value, dtype=float)
        if vector.size != self.model.dimensions.n:
            raise click.UsageError(f"--{name} needs {self.model.dimensions.n} components, got {vector.size}")
        return vector

    def epsilons(self, default: List[float]) -> List[float]:
        return list(self.config.eps) if self.config.eps else list(default)

    def sim_config(self, epsilon: float) -> SimConfig:
        config, simulation = self.config, self.settings.simulation
        return SimConfig(
            epsilon=epsilon, substeps=config.substeps, seed=config.seed, path_count=config.paths,
            record_stride=config.record_stride, h=config.h, dt_cap=simulation.dt_cap,
            workers=config.workers, block_size=simulation.block_size,
        )

    # -- condition gate and manifest ------------------------------------------------

    def condition_report(self) -> ConditionReport:
        states = [self.config.x] if self.config.x else None
        return self.container.get_condition_service().validate_model(self.model, states, self.config.scan_radius)

    def require_valid(self) -> ConditionReport:
        """Refuse to run on a failed report unless --force; forced outputs are stamped"""
        report = self.condition_report()
        if report.passed:
            return report
        failures = {name: verdict.witness for name, verdict in report.failures().items()}
        if not self.config.force:
            raise ConditionCheckFailed(
                f"Model {self.model.name} failed {len(failures)} condition check(s); rerun with --force to override",
                failures,
            )
        logger.warning(f"Running {self.config.command} on a model that failed: {', '.join(failures)}")
        self.artifacts.stamp("unvalidated", True)
        self.unvalidated = True
        return report

    def finish(self):
        self.artifacts.write_manifest(self.config.model_dump())
        click.echo(f"{self.config.command}: artifacts written to {self.artifacts.directory}")


def run_command(name: str) -> Callable:
    """Build the RunContext for a click callback and write the manifest after it"""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(**params):
            run = RunContext.from_click(name, params)
            result = func(run)
            run.finish()
            return result
        return wrapper
    return decorator
