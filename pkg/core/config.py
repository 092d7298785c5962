"""
Configuration management.
Each concern lives in its own settings section with its own environment
prefix; new sections can be added without modifying existing ones.
"""

from typing import Optional
from pydantic_settings import BaseSettings
from pydantic import field_validator
from dotenv import load_dotenv


# Load environment variables
load_dotenv()


class NumericsSettings(BaseSettings):
    """Grids, truncation and solver tolerances"""

    grid_nodes: int = 1025
    line_half_width: float = 8.0
    half_line_lower: float = 1e-6
    half_line_upper: float = 16.0
    torus_period: float = 1.0
    tail_mass_tolerance: float = 1e-8
    max_truncation_doublings: int = 4
    residual_tolerance: float = 1e-5
    centering_tolerance: float = 1e-9
    fredholm_tolerance: float = 1e-8
    stencil_order: int = 4
    path_nodes: int = 257
    gradient_step: float = 1e-5
    log_density_rule: str = "gauss"
    min_q_eigenvalue: float = 1e-12
    xbar_error_target: float = 1e-8
    density_cache_size: int = 64
    density_lattice: float = 0.0

    @field_validator("grid_nodes", "path_nodes")
    @classmethod
    def nodes_must_be_large_enough(cls, v):
        if v < 8:
            raise ValueError("Grids need at least 8 nodes")
        return v

    @field_validator("density_cache_size")
    @classmethod
    def cache_must_hold_an_entry(cls, v):
        if v < 1:
            raise ValueError("The density cache needs room for at least one entry")
        return v

    @field_validator("density_lattice")
    @classmethod
    def lattice_must_be_nonnegative(cls, v):
        if v < 0:
            raise ValueError("The density lattice spacing must be nonnegative (0 disables it)")
        return v

    @field_validator("stencil_order")
    @classmethod
    def stencil_order_supported(cls, v):
        if v not in (2, 4):
            raise ValueError("Stencil order must be 2 or 4")
        return v

    @field_validator("log_density_rule")
    @classmethod
    def log_density_rule_supported(cls, v):
        if v not in ("gauss", "trapezoid"):
            raise ValueError("Log-density rule must be 'gauss' or 'trapezoid'")
        return v

    class Config:
        env_prefix = "NUMERICS_"


class SimulationSettings(BaseSettings):
    """Euler-Maruyama step rule, blocking and safety bounds"""

    substeps: int = 20
    dt_cap: float = 1.0 / 1024.0
    block_size: int = 512
    workers: int = 1
    noise_chunk: int = 256
    blow_up_threshold: float = 1e8
    weight_overflow: float = 700.0
    stiffness_advisory: float = 0.5
    path_cache_size: int = 16

    @field_validator("substeps")
    @classmethod
    def substeps_minimum(cls, v):
        if v < 20:
            raise ValueError("At least 20 substeps per fast time unit are required")
        return v

    @field_validator("block_size", "workers", "noise_chunk", "path_cache_size")
    @classmethod
    def must_be_positive(cls, v):
        if v <= 0:
            raise ValueError("Value must be positive")
        return v

    class Config:
        env_prefix = "SIM_"


class OutputSettings(BaseSettings):
    """Artifact location and number formatting"""

    directory: str = "out"
    significant_digits: int = 17

    class Config:
        env_prefix = "OUTPUT_"


class LoggingSettings(BaseSettings):
    """Logging configuration settings"""

    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None

    class Config:
        env_prefix = "LOG_"


class Settings:
    """
    Main settings class that aggregates all configuration sections.
    """

    def __init__(self):
        self.numerics = NumericsSettings()
        self.simulation = SimulationSettings()
        self.output = OutputSettings()
        self.logging = LoggingSettings()

    def __repr__(self):
        return (
            f"Settings(grid_nodes={self.numerics.grid_nodes}, "
            f"substeps={self.simulation.substeps}, output={self.output.directory})"
        )


def get_settings() -> Settings:
    """Get library settings"""
    return Settings()


def get_development_settings() -> Settings:
    """Get settings for interactive work"""
    settings = Settings()
    settings.logging.level = "DEBUG"
    return settings


def get_test_settings() -> Settings:
    """Get settings used by the test-suite: quiet logs, small blocks"""
    settings = Settings()
    settings.logging.level = "WARNING"
    settings.simulation.block_size = 256
    return settings
