"""
Knowledge-base schemas: entity-description pairs (EDPs) and knowledge bases

NOTE:
1.An EDP is identified by content: sha256 over doc_id and the normalized entity and
  description (lowercase, whitespace collapsed). Original case is kept in the store.
2.A KnowledgeBase holds at most one EDP per edp_id.
"""
import hashlib
import re
from typing import Dict, FrozenSet, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.llmgen.schemas import RawEdpTuple

CORPUS_SCOPE = "corpus"
EDP_ID_LENGTH = 32

_WHITESPACE = re.compile(r"\s+")


def normalize_field(value: str) -> str:
    return _WHITESPACE.sub(" ", value).strip().lower()


def make_edp_id(doc_id: str, entity: str, description: str) -> str:
    key = "\x1f".join([doc_id, normalize_field(entity), normalize_field(description)])
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:EDP_ID_LENGTH]


class Edp(BaseModel):
    """One (entity, fact) pair extracted from chunk chunk_index in sample run sample_run"""
    model_config = ConfigDict(frozen=True)

    edp_id: str = Field(default="", description="Content hash; derived when left empty")
    entity: str = Field(..., min_length=1)
    description: str = Field(..., min_length=1)
    doc_id: str = Field(..., min_length=1)
    chunk_index: int = Field(..., ge=0)
    sample_run: int = Field(..., ge=1)

    @model_validator(mode="before")
    @classmethod
    def derive_id(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            data.pop("render_text", None)
            for key in ("entity", "description"):
                if isinstance(data.get(key), str):
                    data[key] = data[key].strip()
            if not data.get("edp_id") and all(
                isinstance(data.get(k), str) for k in ("doc_id", "entity", "description")
            ):
                data["edp_id"] = make_edp_id(data["doc_id"], data["entity"], data["description"])
        return data

    @property
    def render_text(self) -> str:
        return f"{self.entity}: {self.description}"

    @property
    def provenance_key(self):
        """Ordering used to pick one representative among equal EDPs."""
        return (self.sample_run, self.chunk_index)

    @classmethod
    def from_tuple(cls, raw: RawEdpTuple, doc_id: str, chunk_index: int, sample_run: int) -> "Edp":
        return cls(
            entity=raw.entity_text,
            description=raw.description_text,
            doc_id=doc_id,
            chunk_index=chunk_index,
            sample_run=sample_run,
        )

    def to_record(self) -> dict:
        return {
            "edp_id": self.edp_id,
            "entity": self.entity,
            "description": self.description,
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "sample_run": self.sample_run,
            "render_text": self.render_text,
        }


class KnowledgeBase(BaseModel):
    """A per-run KB K^(s), or a merged K^final over runs"""
    model_config = ConfigDict(frozen=True)

    kb_id: str
    scope: str = Field(..., description="A doc_id, or 'corpus'")
    runs_included: FrozenSet[int] = Field(default_factory=frozenset)
    entries: Dict[str, Edp] = Field(default_factory=dict, description="edp_id -> Edp")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, edp_id: str) -> bool:
        return edp_id in self.entries

    @property
    def edp_ids(self) -> FrozenSet[str]:
        return frozenset(self.entries)

    def sorted_entries(self):
        return [self.entries[k] for k in sorted(self.entries)]

    def meta_record(self) -> dict:
        return {
            "kb_id": self.kb_id,
            "scope": self.scope,
            "runs_included": sorted(self.runs_included),
            "size": len(self.entries),
        }


class KbMeta(BaseModel):
    """Sidecar describing a saved KB"""
    kb_id: str
    scope: str
    runs_included: list[int]
    size: Optional[int] = None
