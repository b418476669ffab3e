"""Process configuration using pydantic-settings."""

from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from environment variables.

    Experiment parameters live in the run config file (see `schemas.run.RunConfig`); these
    settings only cover how the process itself behaves.
    """

    model_config = SettingsConfigDict(
        env_prefix="VIEWDISTILL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "multiview-distill"
    log_level: str = "INFO"

    # Run defaults
    default_config: Path = Path("data/default_run.json")
    output_dir: Path = Path("runs")

    # Compute
    workers: int = 1
    torch_threads: int = 1

    # Logging cadence (episodes between progress lines)
    log_every_episodes: int = 10


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
