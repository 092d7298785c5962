from abc import ABC, abstractmethod
from typing import Dict, List, Optional

from models.slow_fast_model import SlowFastModel


class ModelRepositoryInterface(ABC):
    """
    Abstract interface for obtaining slow-fast models.
    Builtins and model files are served through the same two lookups.
    """

    @abstractmethod
    def names(self) -> List[str]:
        """Names of the registered builtin models"""
        pass

    @abstractmethod
    def get(self, name: str, regime: Optional[int] = None,
            overrides: Optional[Dict[str, float]] = None) -> SlowFastModel:
        """Build a registered builtin, optionally in another regime or with parameter overrides"""
        pass

    @abstractmethod
    def load_file(self, path: str, overrides: Optional[Dict[str, float]] = None) -> SlowFastModel:
        """Compile a model file"""
        pass
