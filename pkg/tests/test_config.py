import pytest
from pydantic import ValidationError

from core.config import NumericsSettings, Settings, SimulationSettings, get_development_settings, get_test_settings
from core.dependencies_container import DependencyContainer, get_container


def test_sections_read_their_environment_prefix(monkeypatch):
    monkeypatch.setenv("NUMERICS_GRID_NODES", "513")
    monkeypatch.setenv("SIM_BLOCK_SIZE", "64")
    monkeypatch.setenv("LOG_LEVEL", "ERROR")
    settings = Settings()
    assert settings.numerics.grid_nodes == 513
    assert settings.simulation.block_size == 64
    assert settings.logging.level == "ERROR"


def test_section_validators():
    with pytest.raises(ValidationError):
        NumericsSettings(stencil_order=3)
    with pytest.raises(ValidationError):
        NumericsSettings(log_density_rule="simpson")
    with pytest.raises(ValidationError):
        SimulationSettings(substeps=10)
    with pytest.raises(ValidationError):
        NumericsSettings(density_cache_size=0)
    with pytest.raises(ValidationError):
        NumericsSettings(density_lattice=-0.1)
    with pytest.raises(ValidationError):
        SimulationSettings(path_cache_size=0)


def test_settings_variants():
    assert get_development_settings().logging.level == "DEBUG"
    assert get_test_settings().logging.level == "WARNING"


def test_container_wiring():
    container = get_container()
    assert isinstance(container, DependencyContainer)
    assert get_container() is container
    assert container.get_rate_service() is container.get_rate_service()
    assert container.get_simulation_service() is container.get_simulation_service()
