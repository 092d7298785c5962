import pytest

from core.config import get_test_settings
from core.dependencies_container import DependencyContainer
from repositories.model_repository import ModelRepository


@pytest.fixture
def settings():
    return get_test_settings()


@pytest.fixture
def container(settings):
    return DependencyContainer(settings)


@pytest.fixture
def models():
    return ModelRepository()


@pytest.fixture
def example1(models):
    return models.get("example1")


@pytest.fixture
def example2(models):
    return models.get("example2")


@pytest.fixture
def example3(models):
    return models.get("example3", 1)
