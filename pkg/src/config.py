"""Configuration management for the coupled low-rank toolkit."""

from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (COUPLED_LOWRANK_*)."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="COUPLED_LOWRANK_",
        case_sensitive=False,
        extra='ignore'
    )

    # Parallelism cap for sweeps and per-candidate decompositions
    threads: int = Field(default=1, ge=1)

    # Sketching
    trunc_tol: float = Field(default=1e-10, gt=0.0, lt=1.0)
    default_seed: int = 0

    # CP-ALS
    als_max_iters: int = Field(default=500, ge=1)
    als_rel_tol: float = Field(default=1e-9, ge=0.0)
    gram_cond_limit: float = 1e12

    # Output
    csv_digits: int = 17
    output_dir: str = "."

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    def float_format(self) -> str:
        """printf-style format for floats written to CSV."""
        return f"%.{self.csv_digits}g"


# Global settings instance
settings = Settings()
