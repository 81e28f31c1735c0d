# core/llm.py
import os
from openai import AsyncOpenAI
from typing import Optional
from .config import settings
from .errors import ConfigurationError
from app.database.datastore import log_error

# Initialize client (note: This will be initialized once and reused)
client: AsyncOpenAI | None = None

async def get_openai_client(base_url: Optional[str] = None, api_key_env: Optional[str] = None) -> AsyncOpenAI:
    """
    Get or initialize the OpenAI-compatible client.
    Returns the existing client if already initialized, otherwise creates a new one.

    Args:
        base_url: Chat-completions endpoint root; falls back to FADER_LLM_BASE_URL
        api_key_env: Name of the env var holding the key; falls back to FADER_LLM_API_KEY_ENV

    Raises:
        ConfigurationError: If the key env var is not set
    """
    global client
    try:
        if client is None:
            key_env = api_key_env or settings.LLM_API_KEY_ENV
            api_key = os.environ.get(key_env)
            if not api_key:
                raise ConfigurationError(f"Environment variable {key_env} is not set")
            client = AsyncOpenAI(api_key=api_key, base_url=base_url or settings.LLM_BASE_URL)
        return client

    except Exception as e:
        await log_error(e, "core/llm.py", {"function": "get_openai_client"})
        raise
