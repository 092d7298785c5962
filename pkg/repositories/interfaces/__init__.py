# Repository interfaces package
from .artifact_repository import ArtifactRepositoryInterface
from .model_repository import ModelRepositoryInterface

__all__ = ["ArtifactRepositoryInterface", "ModelRepositoryInterface"]
