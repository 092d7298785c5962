"""
Dependency injection container for the library and the CLI.
Services are created lazily and shared, so a density or corrector cached by
one service is reused by every service that depends on it.
"""

from functools import lru_cache
from typing import Optional

from core.config import Settings, get_settings
from repositories.artifact_repository import ArtifactRepository
from repositories.interfaces.artifact_repository import ArtifactRepositoryInterface
from repositories.interfaces.model_repository import ModelRepositoryInterface
from repositories.model_repository import ModelRepository
from services.averaging_service import AveragingService
from services.condition_service import ConditionService
from services.fast_dynamics_service import FastDynamicsService
from services.poisson_service import PoissonService
from services.rare_event_service import RareEventService
from services.rate_service import RateService
from services.simulation_service import SimulationService


class DependencyContainer:
    """
    Manages object creation and lifecycle.
    `poisson_method` pins the Poisson route (None lets the service choose);
    `allow_uncertified` turns uncertified-corrector errors into warnings.
    """

    def __init__(self, settings: Optional[Settings] = None, poisson_method: Optional[str] = None,
                 allow_uncertified: bool = False):
        self.settings = settings or get_settings()
        self._poisson_method = poisson_method
        self._allow_uncertified = allow_uncertified
        self._model_repository = None
        self._fast_dynamics_service = None
        self._condition_service = None
        self._poisson_service = None
        self._averaging_service = None
        self._rate_service = None
        self._simulation_service = None
        self._rare_event_service = None

    # -- repositories ---------------------------------------------------------

    def get_model_repository(self) -> ModelRepositoryInterface:
        if self._model_repository is None:
            self._model_repository = ModelRepository()
        return self._model_repository

    def get_artifact_repository(self, directory: Optional[str] = None, **metadata) -> ArtifactRepositoryInterface:
        """A fresh writer per run directory"""
        return ArtifactRepository(directory or self.settings.output.directory,
                                  self.settings.output.significant_digits, metadata)

    # -- services ----------------------------------------------------------------

    def get_fast_dynamics_service(self) -> FastDynamicsService:
        if self._fast_dynamics_service is None:
            self._fast_dynamics_service = FastDynamicsService(self.settings.numerics)
        return self._fast_dynamics_service

    def get_condition_service(self) -> ConditionService:
        if self._condition_service is None:
            self._condition_service = ConditionService(self.settings.numerics, self.get_fast_dynamics_service())
        return self._condition_service

    def get_poisson_service(self) -> PoissonService:
        if self._poisson_service is None:
            self._poisson_service = PoissonService(self.settings.numerics, self.get_fast_dynamics_service())
        return self._poisson_service

    def get_averaging_service(self) -> AveragingService:
        if self._averaging_service is None:
            self._averaging_service = AveragingService(
                self.settings.numerics, self.get_fast_dynamics_service(),
                self.get_poisson_service(), self._poisson_method,
            )
        return self._averaging_service

    def get_rate_service(self) -> RateService:
        if self._rate_service is None:
            self._rate_service = RateService(
                self.settings.numerics, self.get_poisson_service(), self.get_averaging_service(),
                self.get_condition_service(), self._poisson_method, self._allow_uncertified,
            )
        return self._rate_service

    def get_simulation_service(self) -> SimulationService:
        if self._simulation_service is None:
            self._simulation_service = SimulationService(
                self.settings.simulation, self.get_averaging_service(), self.get_rate_service()
            )
        return self._simulation_service

    def get_rare_event_service(self) -> RareEventService:
        if self._rare_event_service is None:
            self._rare_event_service = RareEventService(self.get_simulation_service(), self.get_rate_service())
        return self._rare_event_service


# Global container instance
@lru_cache()
def get_container() -> DependencyContainer:
    """Get singleton instance of dependency container"""
    return DependencyContainer()
