"""Configuration settings for the gate toolkit."""
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings."""
    app_env: str = "development"
    log_level: str = "INFO"

    # Numerics
    default_n_steps: int = 4096
    search_n_steps: int = 1024
    integrator: Literal["magnus4", "midpoint"] = "magnus4"
    jump_epsilon: float = 0.01
    phase_grid: int = 64
    spectrum_samples: int = 257

    # Search
    error_threshold: float = 1e-4
    default_jobs: int = 1

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="ARMD_",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
