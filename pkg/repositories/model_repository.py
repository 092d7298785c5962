"""
Model repository: builtin registry and model-file loader.
"""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError as SchemaValidationError

from exceptions.model_exceptions import InvalidModelDefinition, ModelNotFoundError, UnknownParameterError
from models.slow_fast_model import Coefficients, SlowFastModel
from repositories.builtin_models import BUILTIN_MODELS, BuiltinModel
from repositories.interfaces.model_repository import ModelRepositoryInterface
from schemas.model_config import ModelFileSchema
from utils.expressions import ExpressionArray, compile_array

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

_INITIAL_KEYS = ("x0", "y0")


def read_toml(path: str) -> Dict[str, Any]:
    """Parse a TOML document, mapping I/O and syntax problems to application errors"""
    source = Path(path)
    if not source.is_file():
        raise ModelNotFoundError(f"File {path} does not exist", str(path))
    try:
        with source.open("rb") as handle:
            return tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidModelDefinition(f"{path} is not valid TOML: {exc}", "toml")


def apply_overrides(document: Dict[str, Any], overrides: Optional[Dict[str, float]]) -> Dict[str, Any]:
    """
    Replace [parameters] entries; x0 / y0 overrides set a one-dimensional
    initial state. Unknown names are rejected.
    """
    if not overrides:
        return document
    parameters = dict(document.get("parameters", {}))
    initial = dict(document.get("initial", {}))
    for key, value in overrides.items():
        if key in parameters:
            parameters[key] = float(value)
        elif key in _INITIAL_KEYS:
            initial[key] = [float(value)]
        else:
            known = sorted(parameters) + list(_INITIAL_KEYS)
            raise UnknownParameterError(
                f"Model {document.get('name', 'custom')!r} has no parameter {key!r} (known: {', '.join(known)})", key
            )
    document = dict(document)
    document["parameters"] = parameters
    document["initial"] = initial
    return document


def compile_model(document: Dict[str, Any]) -> SlowFastModel:
    """Validate a model document against ModelFileSchema and compile its expressions"""
    try:
        schema = ModelFileSchema.model_validate(document)
    except SchemaValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        raise InvalidModelDefinition(f"Invalid model definition at {location or 'root'}: {first['msg']}", location)

    n, d, m = schema.dimensions.n, schema.dimensions.d, schema.dimensions.m
    parameters = schema.parameters
    spec = schema.coefficients
    shapes = {
        "b": (n,), "c": (n,), "sigma": (n, m),
        "f": (d,), "g": (d,), "tau1": (d, m), "tau2": (d, m),
    }
    compiled: Dict[str, ExpressionArray] = {
        name: compile_array(getattr(spec, name), shape, n, d, parameters) for name, shape in shapes.items()
    }
    # explicit gradients win; otherwise they are differentiated symbolically
    grad_b = compiled["b"].jacobian_x() if spec.grad_b is None else compile_array(spec.grad_b, (n, n), n, d, parameters)
    grad_c = compiled["c"].jacobian_x() if spec.grad_c is None else compile_array(spec.grad_c, (n, n), n, d, parameters)

    fast_parts = ["f", "tau1", "tau2"] + (["g"] if schema.regime.regime == 2 else [])
    fast_depends_on_x = any(compiled[name].depends_on_x for name in fast_parts)

    coefficients = Coefficients(
        b=compiled["b"], c=compiled["c"], sigma=compiled["sigma"],
        f=compiled["f"], g=compiled["g"], tau1=compiled["tau1"], tau2=compiled["tau2"],
        grad_b=grad_b, grad_c=grad_c, grad_g=compiled["g"].jacobian_x(), g_bound=spec.g_bound,
    )
    return SlowFastModel(
        name=schema.name,
        dimensions=schema.dimensions,
        coefficients=coefficients,
        exponents=schema.exponents,
        regime=schema.regime,
        fast_space=schema.fast_space,
        x0=schema.initial.get("x0"),
        y0=schema.initial.get("y0"),
        degenerate_ok=schema.degenerate_ok,
        fast_depends_on_x=fast_depends_on_x,
        parameters=dict(parameters),
    )


class ModelRepository(ModelRepositoryInterface):
    """
    Serves the builtin models and compiles model files.
    Follows the same validation path for both.
    """

    def __init__(self, builtins: Optional[Dict[str, BuiltinModel]] = None):
        self._builtins = builtins if builtins is not None else BUILTIN_MODELS

    def names(self) -> List[str]:
        return sorted(self._builtins)

    def builtin(self, name: str) -> BuiltinModel:
        try:
            return self._builtins[name]
        except KeyError:
            raise ModelNotFoundError(
                f"Unknown model {name!r}; builtins are {', '.join(self.names())}", name
            )

    def get(self, name: str, regime: Optional[int] = None,
            overrides: Optional[Dict[str, float]] = None) -> SlowFastModel:
        entry = self.builtin(name)
        try:
            document = entry.definition(regime)
        except KeyError:
            offered = ", ".join(str(r) for r in sorted(entry.regimes))
            raise InvalidModelDefinition(f"Model {name} is offered in regime(s) {offered} only", "regime")
        model = compile_model(apply_overrides(document, overrides))
        logger.info(f"Built model {name} in regime {model.regime_index}")
        return model

    def load_file(self, path: str, overrides: Optional[Dict[str, float]] = None) -> SlowFastModel:
        document = read_toml(path)
        model = compile_model(apply_overrides(document, overrides))
        logger.info(f"Loaded model {model.name} from {path}")
        return model
