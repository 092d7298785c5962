# Repositories package
from .artifact_repository import ArtifactRepository
from .builtin_models import BUILTIN_MODELS, BuiltinModel
from .model_repository import ModelRepository

__all__ = ["ArtifactRepository", "BUILTIN_MODELS", "BuiltinModel", "ModelRepository"]
