"""
Text module schemas: tokens, sentences, documents and chunks

NOTE:
1.byte_span values are UTF-8 byte offsets into the source text (end exclusive).
2.All models are frozen; a TokenizerSpec is safe to share across threads.
"""
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, Literal, Optional, Tuple

DEFAULT_CHUNK_TARGET = 250
CHUNK_SWEEP = (50, 100, 150, 200, 250, 300, 350)


class TokenizerSpec(BaseModel):
    """Which tokenizer counts tokens: the built-in regex one or a BPE vocabulary file"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["regex", "bpe"] = "regex"
    vocab_path: Optional[str] = Field(default=None, description="tiktoken-format BPE ranks file")

    @model_validator(mode="after")
    def check_vocab(self) -> "TokenizerSpec":
        if self.kind == "bpe" and not self.vocab_path:
            raise ValueError("BPE tokenizer requires vocab_path")
        return self


DEFAULT_TOKENIZER = TokenizerSpec()


class Token(BaseModel):
    model_config = ConfigDict(frozen=True)

    surface: str
    byte_span: Tuple[int, int]


class Sentence(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    token_count: int = Field(..., ge=0)
    byte_span: Tuple[int, int]


class Document(BaseModel):
    """A long source document D"""
    model_config = ConfigDict(frozen=True)

    doc_id: str = Field(..., min_length=1)
    text: str = Field(..., min_length=1)
    meta: Dict[str, str] = Field(default_factory=dict)


class Chunk(BaseModel):
    """One sentence-aligned segment D_i of a document"""
    model_config = ConfigDict(frozen=True)

    doc_id: str
    chunk_index: int = Field(..., ge=0)
    text: str
    token_count: int = Field(..., gt=0)
    sentence_range: Tuple[int, int] = Field(..., description="First and last sentence index, inclusive")

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "text": self.text,
            "token_count": self.token_count,
            "sentence_range": list(self.sentence_range),
        }
