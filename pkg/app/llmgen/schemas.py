"""
LLM generation schemas: prompt templates, speculated questions, raw EDP tuples
"""
import re
from typing import Dict, List, Optional, Protocol, Tuple, runtime_checkable

from pydantic import BaseModel, ConfigDict, Field, field_validator

SLOT_PATTERN = re.compile(r"\[INSERT [A-Z0-9 ]+?\]")

NO_QUESTIONS_SENTINEL = "no questions extracted"


class PromptTemplate(BaseModel):
    """A system/user prompt pair with [INSERT ...] slot markers"""
    model_config = ConfigDict(frozen=True)

    template_id: str
    version: str = "v1"
    system_text: str
    user_text_with_slots: str

    @property
    def slots(self) -> List[str]:
        """Distinct slot markers in order of first appearance."""
        seen: Dict[str, None] = {}
        for text in (self.system_text, self.user_text_with_slots):
            for marker in SLOT_PATTERN.findall(text):
                seen.setdefault(marker, None)
        return list(seen)


class SpeculatedQuestion(BaseModel):
    """One question q_ij speculated for chunk D_i in a sample run"""
    model_config = ConfigDict(frozen=True)

    question_text: str = Field(..., min_length=1)
    doc_id: str
    chunk_index: int = Field(..., ge=0)
    sample_run: int = Field(..., ge=1)

    @field_validator("question_text")
    @classmethod
    def strip_text(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("question_text must be non-empty")
        return value

    def to_record(self) -> dict:
        return {
            "question_text": self.question_text,
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "sample_run": self.sample_run,
        }


class RawEdpTuple(BaseModel):
    """An (entity, description) pair as parsed from a completion"""
    model_config = ConfigDict(frozen=True)

    entity_text: str = Field(..., min_length=1)
    description_text: str = Field(..., min_length=1)
    source_offset: Tuple[int, int]


class TranscriptRecord(BaseModel):
    """One logged request/response pair"""
    template_id: str
    doc_id: Optional[str] = None
    chunk_index: Optional[int] = None
    sample_run: Optional[int] = None
    system: str
    user: str
    completion: str


@runtime_checkable
class LlmBackend(Protocol):
    """
    Contract every LLM backend satisfies.

    If deterministic is True, identical (system, user, seed) must give identical output.
    Backends are shared across concurrent chunk jobs.
    """
    name: str
    deterministic: bool

    async def complete(self, system: str, user: str, seed: int) -> str:
        ...
