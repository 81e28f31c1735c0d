"""
JSON-schema validation for every JSONL record type the pipeline reads back.

NOTE:
1.Validators are built once and reused; jsonschema reports the first violation.
2.Readers call validate_record with the 1-based line number so errors point at the file line.
"""
from functools import lru_cache
from typing import Any, Dict

from jsonschema import Draft202012Validator

from app.core.errors import RecordError

_NON_EMPTY = {"type": "string", "minLength": 1}

RECORD_SCHEMAS: Dict[str, Dict[str, Any]] = {
    "document": {
        "type": "object",
        "required": ["doc_id", "text"],
        "properties": {
            "doc_id": _NON_EMPTY,
            "text": _NON_EMPTY,
            "meta": {"type": "object", "additionalProperties": {"type": "string"}},
        },
    },
    "chunk": {
        "type": "object",
        "required": ["doc_id", "chunk_index", "text", "token_count"],
        "properties": {
            "doc_id": _NON_EMPTY,
            "chunk_index": {"type": "integer", "minimum": 0},
            "text": _NON_EMPTY,
            "token_count": {"type": "integer", "minimum": 1},
            "sentence_range": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
    "question": {
        "type": "object",
        "required": ["question_text", "doc_id", "chunk_index", "sample_run"],
        "properties": {
            "question_text": _NON_EMPTY,
            "doc_id": _NON_EMPTY,
            "chunk_index": {"type": "integer", "minimum": 0},
            "sample_run": {"type": "integer", "minimum": 1},
        },
    },
    "edp": {
        "type": "object",
        "required": [
            "edp_id", "entity", "description", "doc_id",
            "chunk_index", "sample_run", "render_text",
        ],
        "properties": {
            "edp_id": _NON_EMPTY,
            "entity": _NON_EMPTY,
            "description": _NON_EMPTY,
            "doc_id": _NON_EMPTY,
            "chunk_index": {"type": "integer", "minimum": 0},
            "sample_run": {"type": "integer", "minimum": 1},
            "render_text": _NON_EMPTY,
        },
    },
    "task": {
        "type": "object",
        "required": ["task_id", "doc_id", "question", "answers"],
        "properties": {
            "task_id": _NON_EMPTY,
            "doc_id": _NON_EMPTY,
            "question": _NON_EMPTY,
            "answers": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "options": {"type": "array", "items": {"type": "string"}, "minItems": 4, "maxItems": 4},
            "gold_index": {"type": "integer", "minimum": 1, "maximum": 4},
        },
        "dependentRequired": {"options": ["gold_index"], "gold_index": ["options"]},
    },
    "external_unit": {
        "type": "object",
        "required": ["unit_id", "doc_id", "text"],
        "properties": {
            "unit_id": _NON_EMPTY,
            "doc_id": _NON_EMPTY,
            "text": _NON_EMPTY,
            "chunk_index": {"type": "integer", "minimum": 0},
        },
    },
    "vector": {
        "type": "object",
        "required": ["text_sha256", "vector"],
        "properties": {
            "text_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
            "vector": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        },
    },
}


@lru_cache(maxsize=None)
def get_validator(kind: str) -> Draft202012Validator:
    """Build (once) the validator for a record kind."""
    if kind not in RECORD_SCHEMAS:
        raise KeyError(f"Unknown record kind: {kind}")
    return Draft202012Validator(RECORD_SCHEMAS[kind])


def validate_record(kind: str, record: Any, path: str, line_number: int) -> Dict[str, Any]:
    """
    Validate one parsed JSONL line.

    Raises:
        RecordError: With the path and line number of the violation
    """
    error = next(iter(get_validator(kind).iter_errors(record)), None)
    if error is not None:
        field = ".".join(str(p) for p in error.absolute_path) or "<record>"
        raise RecordError(f"{kind} record invalid at {field}: {error.message}", path, line_number)
    return record
