from pydantic_settings import BaseSettings, SettingsConfigDict
from pathlib import Path
from typing import Optional

class Settings(BaseSettings):
    # Environment-level settings; run-level knobs live in RunConfig
    WORKDIR: str = "workdir"
    LLM_BASE_URL: Optional[str] = None
    LLM_MODEL: str = "gpt-4o-2024-08-06"
    LLM_API_KEY_ENV: str = "OPENAI_API_KEY"
    EMBEDDING_URL: Optional[str] = None
    EMBEDDING_MODEL: str = "all-MiniLM-L6-v2"

    model_config = SettingsConfigDict(
        env_file=Path(__file__).parent.parent.parent / ".env",
        env_prefix="FADER_",
        extra="ignore",
    )

settings = Settings()
