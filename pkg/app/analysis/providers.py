"""
Embedding providers for the speculated-question analysis

NOTE:
1.FileVectorProvider reads precomputed vectors from a JSONL sidecar keyed by sha256 of the text.
2.HttpEmbeddingProvider posts batches to an OpenAI-style /embeddings endpoint.
"""
import os
from pathlib import Path
from typing import Dict, List, Optional

import aiohttp

from app.core.config import settings
from app.core.errors import ConfigurationError, EmbeddingProviderError
from app.database.datastore import iter_jsonl, text_sha256
from app.database.schema_setup import validate_record

DEFAULT_BATCH_SIZE = 32


def _batches(texts: List[str], size: int):
    for start in range(0, len(texts), size):
        yield start // size, texts[start:start + size]


class FileVectorProvider:
    """Precomputed vectors, one {"text_sha256", "vector"} record per line"""

    def __init__(self, path: Path, batch_size: int = DEFAULT_BATCH_SIZE) -> None:
        self.path = Path(path)
        self.batch_size = batch_size
        self.vectors: Dict[str, List[float]] = {}
        if not self.path.exists():
            raise ConfigurationError("Vector sidecar file not found", str(self.path))
        dims = set()
        for line_number, record in iter_jsonl(self.path):
            validate_record("vector", record, str(self.path), line_number)
            self.vectors[record["text_sha256"]] = [float(x) for x in record["vector"]]
            dims.add(len(record["vector"]))
        if len(dims) > 1:
            raise ConfigurationError(f"Vector sidecar mixes dimensions {sorted(dims)}", str(self.path))
        self.dim = dims.pop() if dims else 0

    async def embed(self, texts: List[str]) -> List[List[float]]:
        vectors: List[List[float]] = []
        for batch_index, batch in _batches(texts, self.batch_size):
            for text in batch:
                key = text_sha256(text)
                if key not in self.vectors:
                    raise EmbeddingProviderError(f"no vector for text {key[:12]}", batch_index)
                vectors.append(self.vectors[key])
        return vectors


class HttpEmbeddingProvider:
    """Embeddings from a network service speaking the OpenAI embeddings wire format"""

    def __init__(
        self,
        url: Optional[str] = None,
        model: Optional[str] = None,
        api_key_env: Optional[str] = None,
        batch_size: int = DEFAULT_BATCH_SIZE,
        timeout: float = 60.0,
    ) -> None:
        self.url = url or settings.EMBEDDING_URL
        if not self.url:
            raise ConfigurationError("No embedding endpoint configured (FADER_EMBEDDING_URL)")
        self.model = model or settings.EMBEDDING_MODEL
        self.api_key_env = api_key_env or settings.LLM_API_KEY_ENV
        self.batch_size = batch_size
        self.timeout = aiohttp.ClientTimeout(total=timeout)
        self.dim = 0

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    async def embed(self, texts: List[str]) -> List[List[float]]:
        vectors: List[List[float]] = []
        async with aiohttp.ClientSession(timeout=self.timeout, headers=self._headers()) as session:
            for batch_index, batch in _batches(texts, self.batch_size):
                try:
                    async with session.post(self.url, json={"model": self.model, "input": batch}) as response:
                        response.raise_for_status()
                        payload = await response.json()
                    data = sorted(payload["data"], key=lambda item: item["index"])
                    vectors.extend([float(x) for x in item["embedding"]] for item in data)
                except (aiohttp.ClientError, KeyError, TypeError, ValueError) as e:
                    raise EmbeddingProviderError(str(e), batch_index) from e
        if vectors:
            self.dim = len(vectors[0])
        return vectors
