"""
Similarity-analysis schemas
"""
from enum import Enum
from typing import List, Protocol, runtime_checkable

from pydantic import BaseModel, Field

CLOSE_THRESHOLD = 0.85
TOPIC_THRESHOLD = 0.7


class SimilarityBucket(str, Enum):
    CLOSE = "close"
    TOPIC = "topic"
    OTHER = "other"


class QuestionPair(BaseModel):
    real_question: str
    speculated_question: str
    similarity: float
    bucket: SimilarityBucket


class SimilarityBucketReport(BaseModel):
    """How closely speculated questions match real ones"""
    pair_count: int = Field(..., ge=0)
    close_fraction: float = 0.0
    topic_fraction: float = 0.0
    other_fraction: float = 0.0
    top_pairs: List[QuestionPair] = Field(default_factory=list, description="Best match per speculated question, most similar first")


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Maps texts to vectors; identical texts give identical vectors within a session"""
    dim: int

    async def embed(self, texts: List[str]) -> List[List[float]]:
        ...
