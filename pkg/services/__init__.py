# Services package
from .averaging_service import AveragingService
from .condition_service import ConditionService
from .fast_dynamics_service import FastDynamicsService
from .poisson_service import PoissonService
from .rare_event_service import RareEventService
from .rate_service import RateService
from .simulation_service import SimulationService

__all__ = [
    "AveragingService",
    "ConditionService",
    "FastDynamicsService",
    "PoissonService",
    "RareEventService",
    "RateService",
    "SimulationService",
]
