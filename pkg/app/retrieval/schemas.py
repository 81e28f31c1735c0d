"""
Retrieval schemas: units, the BM25 index, ranked contexts and the search API models
"""
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

INDEX_FORMAT_VERSION = 1
DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
# index labels name files under <workdir>/index
LABEL_PATTERN = r"^[A-Za-z0-9_]+$"

UnitKind = Literal["edp", "chunk", "external_proposition"]


class RetrievalUnit(BaseModel):
    """An atomic piece of retrievable text (EDP, baseline chunk, or external proposition)"""
    model_config = ConfigDict(frozen=True)

    unit_id: str = Field(..., min_length=1)
    kind: UnitKind
    text: str
    token_count: int = Field(..., ge=0, description="Tokenizer count of text under the run's TokenizerSpec")
    doc_id: str
    chunk_index: Optional[int] = None
    sample_run: Optional[int] = None

    def to_record(self) -> dict:
        return self.model_dump()


class Bm25Index(BaseModel):
    """
    Okapi BM25 inverted index.

    postings maps term -> {unit_id: term frequency}; lengths maps unit_id -> analyzed length.
    """
    version: int = INDEX_FORMAT_VERSION
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    n_docs: int
    avgdl: float
    lengths: Dict[str, int]
    postings: Dict[str, Dict[str, int]]

    def doc_freq(self, term: str) -> int:
        return len(self.postings.get(term, {}))


class RankedContext(BaseModel):
    """Units ranked for a query, and the prefix that fits the token budget"""
    query: str
    budget_b: int = Field(..., ge=0)
    hits: List[Tuple[str, float]] = Field(default_factory=list, description="(unit_id, score), best first")
    selected: List[str] = Field(default_factory=list)
    used_tokens: int = 0


class SearchRequest(BaseModel):
    label: str = Field(..., pattern=LABEL_PATTERN, description="Index label, e.g. edp_s3 or chunk250")
    query: str = Field(..., min_length=1)
    budget: int = Field(..., ge=0, description="Context budget in tokens")
    doc_id: Optional[str] = Field(default=None, description="Restrict to one document's units")


class SearchHit(BaseModel):
    unit_id: str
    score: float
    text: str
    token_count: int


class SearchResponse(BaseModel):
    label: str
    query: str
    budget: int
    used_tokens: int
    hits: List[SearchHit]
    context: str
