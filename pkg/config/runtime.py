"""
Process-level runtime settings read from the environment.

Values come from FEDAUCTION_* environment variables or a .env file in the
working directory.
"""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="FEDAUCTION_",
        env_file=".env",
        extra="ignore",
    )

    output_dir: str = Field(default="results", description="Default directory for CSV output")
    jobs: int = Field(default=1, ge=1, description="Default number of worker processes")
