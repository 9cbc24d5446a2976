from typing import List

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # =========================
    # Output & scenarios
    # =========================

    OUTPUT_DIR: str = Field(
        default="outputs",
        description="Root directory for run artifacts (CSV, cube, reports, heatmaps)"
    )

    SCENARIO_DIR: str = Field(
        default="scenarios",
        description="Directory holding the shipped scenario JSON files"
    )

    # =========================
    # Numerics
    # =========================

    MAX_GRID_CHUNK: int = Field(
        default=20000,
        gt=0,
        description="Grid points evaluated per focusing chunk"
    )

    # =========================
    # HTTP
    # =========================

    CORS_ORIGINS: List[str] = Field(
        default=["http://localhost:3000", "http://127.0.0.1:3000"],
        description="Origins allowed to call the run endpoints (JSON list in env)"
    )

    # =========================
    # Application Environment
    # =========================

    LOG_LEVEL: str = Field(
        default="INFO",
        description="Root log level: DEBUG | INFO | WARNING | ERROR"
    )

    ENV: str = Field(
        default="development",
        description="Application environment: development | staging | production"
    )

    model_config = SettingsConfigDict(
        env_prefix="FAA_",
        env_file=".env",              # load from .env file
        env_file_encoding="utf-8",
        extra="ignore",               # ignore extra env vars
        populate_by_name=True,
    )


# =========================
# Fail fast for bad config
# =========================
try:
    settings = Settings()
except ValidationError as exc:
    print("\nEnvironment configuration error (FAA_* variables or .env)\n")
    for err in exc.errors():
        print(f"- {err['loc'][0]}: {err['msg']}")
    raise RuntimeError("Missing or invalid environment variables") from exc
