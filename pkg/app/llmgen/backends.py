"""
LLM backends: a deterministic mock for offline runs, and an OpenAI-compatible chat backend

NOTE:
1.The mock recognises which template produced a prompt by matching it against the
  template assets, then answers from the recovered slot values only.
2.Both backends are safe to share across concurrent chunk jobs.
"""
import asyncio
import hashlib
import re
from typing import Dict, List, Optional, Set

import openai

from app.core.config import settings
from app.core.errors import BackendError
from app.core.llm import get_openai_client
from app.text.utils import count_tokens, split_sentences, word_strings
from prompts.prompts import DEFAULT_TEMPLATE_VERSION
from .schemas import NO_QUESTIONS_SENTINEL, LlmBackend
from .templates import (
    DOCUMENTS_SLOT,
    EXCERPT_SLOT,
    OPTION_SLOTS,
    QUESTION_SLOT,
    ROUND1_SLOT,
    identify_prompt,
)

STOPWORDS = frozenset(
    """
    a an the and or but if then of to in on at by for with from as is are was were be been
    being it its this that these those there here he she they them his her their we you i
    me my our your do does did not no so what who whom whose which when where why how
    about into over under than also can could would should will may might has have had
    """.split()
)

IDK_ANSWER = "I don't know. The context provided does not mention it."
UNANSWERABLE = "Unanswerable."
ANSWER_WORD_CAP = 10
COMPRESSED_WORD_CAP = 8

_CONTEXT_LINE = re.compile(r"^- ", re.MULTILINE)


def content_words(text: str) -> List[str]:
    """Lowercased word runs that are not stopwords, in order."""
    return [w for w in word_strings(text) if w not in STOPWORDS]


def _stable_int(*parts: object) -> int:
    joined = "\x1f".join(str(p) for p in parts)
    return int(hashlib.sha256(joined.encode("utf-8")).hexdigest()[:12], 16)


class MockBackend:
    """
    Deterministic stand-in for a chat model.

    Speculation: one question per excerpt sentence.
    Extraction: one tuple per kept sentence; sentence j is dropped when
    (j + backend seed + call seed) % 3 == 0, so callers passing the sample run as
    the call seed get overlapping but distinct KBs per run.
    QA: answers from the context sentence with the largest content-word overlap.
    """

    name = "mock"
    deterministic = True

    def __init__(self, seed: int, template_version: str = DEFAULT_TEMPLATE_VERSION) -> None:
        self.seed = seed
        self.template_version = template_version

    async def complete(self, system: str, user: str, seed: int) -> str:
        identified = identify_prompt(system, user, self.template_version)
        if identified is None:
            return ""
        template, bindings = identified
        template_id = template.template_id

        if template_id.startswith("spec_"):
            return self._speculate(bindings[EXCERPT_SLOT])
        if template_id.startswith("kb_"):
            return self._extract(bindings[EXCERPT_SLOT], seed)
        if template_id == "qa_narrative_r2":
            return self._compress(bindings[QUESTION_SLOT], bindings[ROUND1_SLOT])
        if template_id == "qa_quality":
            options = [bindings[slot] for slot in OPTION_SLOTS]
            return self._choose(bindings[DOCUMENTS_SLOT], bindings[QUESTION_SLOT], options, seed)
        fallback = UNANSWERABLE if template_id == "qa_qasper" else IDK_ANSWER
        return self._answer(bindings[DOCUMENTS_SLOT], bindings[QUESTION_SLOT], fallback)

    def _speculate(self, excerpt: str) -> str:
        lines = []
        for sentence in split_sentences(excerpt):
            words = content_words(sentence.text) or word_strings(sentence.text)
            if words:
                lines.append(f"- What does the passage say about {words[0]}?")
        return "\n".join(lines) if lines else f"{NO_QUESTIONS_SENTINEL}."

    def _extract(self, excerpt: str, seed: int) -> str:
        tuples = []
        for j, sentence in enumerate(split_sentences(excerpt)):
            if (j + self.seed + seed) % 3 == 0:
                continue
            words = word_strings(sentence.text, lowercase=False)
            if not words:
                continue
            entity = " ".join(words[:4])
            description = (
                sentence.text.replace('"', "'").replace("(", "[").replace(")", "]")
            )
            tuples.append(f"({entity}, {description})")
        return ",\n".join(tuples)

    @staticmethod
    def _context_sentences(context: str) -> List[str]:
        sentences = []
        for unit in _CONTEXT_LINE.split(context):
            sentences.extend(s.text for s in split_sentences(unit.strip()))
        return sentences

    def _answer(self, context: str, question: str, fallback: str) -> str:
        question_words: Set[str] = set(content_words(question))
        best, best_overlap = None, 0
        for sentence in self._context_sentences(context):
            overlap = len(question_words & set(content_words(sentence)))
            if overlap > best_overlap:
                best, best_overlap = sentence, overlap
        if best is None:
            return fallback

        seen: Dict[str, None] = {}
        for word in word_strings(best, lowercase=False):
            lowered = word.lower()
            if lowered in question_words or lowered in STOPWORDS or lowered in seen:
                continue
            seen[lowered] = None
            if len(seen) == ANSWER_WORD_CAP:
                break
        if not seen:
            return fallback
        return " ".join(seen) + "."

    @staticmethod
    def _compress(question: str, round1: str) -> str:
        if round1.strip().lower().startswith("i don't know"):
            compressed = "I don't know."
        else:
            question_words = set(word_strings(question))
            original = word_strings(round1, lowercase=False)
            kept = [w for w in original if w.lower() not in question_words][:COMPRESSED_WORD_CAP]
            compressed = " ".join(kept) + "." if kept else round1.strip()
        # round 2 is never longer than round 1
        if count_tokens(compressed) > count_tokens(round1):
            return round1.strip()
        return compressed

    def _choose(self, context: str, question: str, options: List[str], seed: int) -> str:
        context_words = set(content_words(context))
        best_index, best_overlap = 0, 0
        for index, option in enumerate(options, 1):
            overlap = len(set(content_words(option)) & context_words)
            if overlap > best_overlap:
                best_index, best_overlap = index, overlap
        if best_index == 0:
            best_index = 1 + _stable_int(self.seed, seed, question) % 4
        return str(best_index)


def mock_backend(seed: int, template_version: str = DEFAULT_TEMPLATE_VERSION) -> MockBackend:
    return MockBackend(seed=seed, template_version=template_version)


_RETRYABLE_ERRORS = (
    openai.APIConnectionError,
    openai.APITimeoutError,
    openai.RateLimitError,
    openai.InternalServerError,
)


class HttpChatBackend:
    """Chat-completions backend for any OpenAI-compatible endpoint."""

    name = "http"
    deterministic = False

    def __init__(
        self,
        model: Optional[str] = None,
        base_url: Optional[str] = None,
        api_key_env: Optional[str] = None,
        temperature: Optional[float] = None,
    ) -> None:
        self.model = model or settings.LLM_MODEL
        self.base_url = base_url or settings.LLM_BASE_URL
        self.api_key_env = api_key_env or settings.LLM_API_KEY_ENV
        self.temperature = temperature

    async def complete(self, system: str, user: str, seed: int) -> str:
        client = await get_openai_client(self.base_url, self.api_key_env)
        request = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "seed": seed,
        }
        if self.temperature is not None:
            request["temperature"] = self.temperature
        try:
            response = await client.chat.completions.create(**request)
        except _RETRYABLE_ERRORS as e:
            raise BackendError(str(e), retryable=True) from e
        except openai.OpenAIError as e:
            raise BackendError(str(e), retryable=False) from e
        return response.choices[0].message.content or ""


async def call_backend(
    backend: LlmBackend,
    system: str,
    user: str,
    seed: int,
    attempts: int = 3,
    base_delay: float = 1.0,
) -> str:
    """
    Call a backend with exponential backoff.

    Args:
        backend: Any LlmBackend
        system: System prompt
        user: User prompt
        seed: Per-call seed (the sample run for KB construction)
        attempts: Total tries before giving up
        base_delay: Seconds before the second try; doubles each retry

    Returns:
        str: The completion

    Raises:
        BackendError: After the last failed attempt, or at once if not retryable
    """
    last_error: Optional[Exception] = None
    for attempt in range(1, attempts + 1):
        try:
            return await backend.complete(system, user, seed)
        except BackendError as e:
            if not e.retryable:
                raise BackendError(str(e), attempts=attempt, retryable=False) from e
            last_error = e
        except Exception as e:
            last_error = e
        if attempt < attempts:
            print(f"Backend {backend.name} failed (attempt {attempt}/{attempts}), retrying")
            await asyncio.sleep(base_delay * 2 ** (attempt - 1))
    raise BackendError(str(last_error), attempts=attempts, retryable=True) from last_error
