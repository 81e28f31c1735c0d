"""
LLM generation steps: question speculation, EDP extraction and question answering

NOTE:
1.Every call goes through call_backend (3 attempts, exponential backoff).
2.The sample run doubles as the per-call seed, so runs differ while staying reproducible.
3.Transcripts are collected in memory and written sorted, so --jobs never changes bytes on disk.
"""
import asyncio
from pathlib import Path
from typing import List, Optional, Sequence

from app.core.errors import BackendError
from app.database.datastore import log_error, write_jsonl
from app.kb.schemas import Edp
from app.text.schemas import Chunk
from prompts.prompts import DEFAULT_TEMPLATE_VERSION
from .backends import call_backend
from .parsing import (
    clean_answer,
    is_no_questions,
    parse_edp_tuples,
    parse_speculated_questions,
)
from .schemas import LlmBackend, SpeculatedQuestion, TranscriptRecord
from .templates import (
    DOCUMENTS_SLOT,
    EXCERPT_SLOT,
    QUESTION_SLOT,
    QUESTIONS_SLOT,
    ROUND1_SLOT,
    get_template,
    option_bindings,
    render_prompt,
)


class TranscriptLog:
    """Collects request/response pairs from concurrent jobs."""

    def __init__(self) -> None:
        self.records: List[TranscriptRecord] = []
        self._lock = asyncio.Lock()

    async def add(self, record: TranscriptRecord) -> None:
        async with self._lock:
            self.records.append(record)

    def write(self, path: Path) -> int:
        ordered = sorted(
            self.records,
            key=lambda r: (r.template_id, r.doc_id or "", r.chunk_index or 0, r.sample_run or 0, r.user),
        )
        return write_jsonl(path, (r.model_dump() for r in ordered))


async def _complete(
    backend: LlmBackend,
    template_id: str,
    bindings: dict,
    seed: int,
    version: str,
    transcript: Optional[TranscriptLog],
    chunk: Optional[Chunk] = None,
    sample_run: Optional[int] = None,
) -> str:
    system, user = render_prompt(get_template(template_id, version), bindings)
    completion = await call_backend(backend, system, user, seed)
    if transcript is not None:
        await transcript.add(
            TranscriptRecord(
                template_id=template_id,
                doc_id=chunk.doc_id if chunk else None,
                chunk_index=chunk.chunk_index if chunk else None,
                sample_run=sample_run,
                system=system,
                user=user,
                completion=completion,
            )
        )
    return completion


async def speculate_questions(
    chunk: Chunk,
    backend: LlmBackend,
    template_id: str,
    sample_run: int,
    version: str = DEFAULT_TEMPLATE_VERSION,
    transcript: Optional[TranscriptLog] = None,
) -> List[SpeculatedQuestion]:
    """
    Speculate the questions a reader might ask about one chunk.

    Returns:
        List[SpeculatedQuestion]: Empty for the "no questions extracted" sentinel

    Raises:
        BackendError: If the backend keeps failing
    """
    try:
        completion = await _complete(
            backend, template_id, {EXCERPT_SLOT: chunk.text}, sample_run, version, transcript, chunk, sample_run
        )
        texts = parse_speculated_questions(completion)
        if not texts and completion.strip() and not is_no_questions(completion):
            print(f"Warning: unparseable speculation for {chunk.doc_id}#{chunk.chunk_index} run {sample_run}")
            await log_error(
                error=ValueError("Unparseable speculation completion"),
                location="llmgen/utils.py - speculate_questions",
                additional_info={
                    "severity": "warning",
                    "doc_id": chunk.doc_id,
                    "chunk_index": chunk.chunk_index,
                    "sample_run": sample_run,
                    "completion": completion[:500],
                },
            )
        return [
            SpeculatedQuestion(
                question_text=text,
                doc_id=chunk.doc_id,
                chunk_index=chunk.chunk_index,
                sample_run=sample_run,
            )
            for text in texts
        ]
    except BackendError:
        raise
    except Exception as e:
        await log_error(
            error=e,
            location="llmgen/utils.py - speculate_questions",
            additional_info={"doc_id": chunk.doc_id, "chunk_index": chunk.chunk_index, "sample_run": sample_run},
        )
        raise


def format_questions(questions: Sequence[SpeculatedQuestion]) -> str:
    return "\n".join(f"- {q.question_text}" for q in questions)


async def extract_edps(
    chunk: Chunk,
    questions: Optional[Sequence[SpeculatedQuestion]],
    backend: LlmBackend,
    template_id: str,
    sample_run: int,
    version: str = DEFAULT_TEMPLATE_VERSION,
    transcript: Optional[TranscriptLog] = None,
) -> tuple:
    """
    Extract EDPs from one chunk, guided by its speculated questions.

    Args:
        chunk: Source chunk
        questions: Speculated questions; None with a fact-only template
        backend: LLM backend
        template_id: kb_* template (fact-only variants take no questions)
        sample_run: Run index, stamped on every EDP and used as the call seed

    Returns:
        Tuple[List[Edp], int]: The EDPs and the number of malformed tuples skipped
    """
    bindings = {EXCERPT_SLOT: chunk.text}
    if questions is not None:
        bindings[QUESTIONS_SLOT] = format_questions(questions)
    try:
        completion = await _complete(backend, template_id, bindings, sample_run, version, transcript, chunk, sample_run)
        raw_tuples, malformed = parse_edp_tuples(completion)
        edps = [Edp.from_tuple(raw, chunk.doc_id, chunk.chunk_index, sample_run) for raw in raw_tuples]
        return edps, malformed
    except (BackendError, ValueError):
        raise
    except Exception as e:
        await log_error(
            error=e,
            location="llmgen/utils.py - extract_edps",
            additional_info={"doc_id": chunk.doc_id, "chunk_index": chunk.chunk_index, "sample_run": sample_run},
        )
        raise


async def answer_question(
    question: str,
    context: str,
    backend: LlmBackend,
    template_id: str,
    options: Optional[List[str]] = None,
    seed: int = 0,
    version: str = DEFAULT_TEMPLATE_VERSION,
    transcript: Optional[TranscriptLog] = None,
) -> str:
    """
    Answer a question from a rendered context (see retrieval render_context).

    Multiple-choice templates also take the four options; their answer is the raw
    completion, to be read with parse_option_index.
    """
    bindings = {DOCUMENTS_SLOT: context, QUESTION_SLOT: question}
    if options is not None:
        bindings.update(option_bindings(options))
    completion = await _complete(backend, template_id, bindings, seed, version, transcript)
    return completion.strip() if options is not None else clean_answer(completion)


async def compress_answer(
    question: str,
    round1_answer: str,
    backend: LlmBackend,
    template_id: str = "qa_narrative_r2",
    seed: int = 0,
    version: str = DEFAULT_TEMPLATE_VERSION,
    transcript: Optional[TranscriptLog] = None,
) -> str:
    """Second answering round: shorten a round-1 answer."""
    bindings = {QUESTION_SLOT: question, ROUND1_SLOT: round1_answer}
    completion = await _complete(backend, template_id, bindings, seed, version, transcript)
    return clean_answer(completion)
