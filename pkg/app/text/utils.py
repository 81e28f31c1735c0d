"""
Tokenization, sentence segmentation and sentence-aligned chunking
"""
import base64
import re
from functools import lru_cache
from typing import List, Tuple

import tiktoken

from app.core.errors import ConfigurationError
from .schemas import (
    DEFAULT_CHUNK_TARGET,
    DEFAULT_TOKENIZER,
    Chunk,
    Document,
    Sentence,
    Token,
    TokenizerSpec,
)

# Unicode word runs, or any single non-space, non-word character
TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]", re.UNICODE)
WORD_PATTERN = re.compile(r"\w+", re.UNICODE)

# Pre-tokenization split used with cl100k-style vocabularies
CL100K_PAT_STR = (
    r"""(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}|"""
    r""" ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+"""
)

_TERMINATOR = re.compile(r"[.!?]+[\"'’”)\]]*")


@lru_cache(maxsize=8)
def load_bpe_encoding(vocab_path: str) -> tiktoken.Encoding:
    """
    Load a tiktoken-format ranks file (one "<base64 token> <rank>" per line).

    Raises:
        ConfigurationError: If the file is missing or cannot be parsed
    """
    try:
        with open(vocab_path, "rb") as f:
            contents = f.read()
        ranks = {
            base64.b64decode(token, validate=True): int(rank)
            for token, rank in (line.split() for line in contents.splitlines() if line.strip())
        }
        if not ranks:
            raise ValueError("vocabulary is empty")
        return tiktoken.Encoding(
            name="fader-bpe",
            pat_str=CL100K_PAT_STR,
            mergeable_ranks=ranks,
            special_tokens={},
        )
    except FileNotFoundError as e:
        raise ConfigurationError("Tokenizer vocabulary file not found", vocab_path) from e
    except Exception as e:
        raise ConfigurationError(f"Tokenizer vocabulary file is corrupt: {e}", vocab_path) from e


def tokenize(text: str, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> List[Token]:
    """
    Split text into tokens with UTF-8 byte spans.

    Args:
        text: Source text
        tokenizer: Regex default, or a BPE vocabulary

    Returns:
        List[Token]: Deterministic, non-overlapping, strictly increasing tokens
    """
    if not text:
        return []

    if tokenizer.kind == "bpe":
        encoding = load_bpe_encoding(tokenizer.vocab_path)
        tokens: List[Token] = []
        offset = 0
        for token_id in encoding.encode_ordinary(text):
            piece = encoding.decode_single_token_bytes(token_id)
            tokens.append(
                Token(
                    surface=piece.decode("utf-8", errors="replace"),
                    byte_span=(offset, offset + len(piece)),
                )
            )
            offset += len(piece)
        return tokens

    tokens = []
    last_char, last_byte = 0, 0
    for match in TOKEN_PATTERN.finditer(text):
        start = last_byte + len(text[last_char:match.start()].encode("utf-8"))
        end = start + len(match.group().encode("utf-8"))
        tokens.append(Token(surface=match.group(), byte_span=(start, end)))
        last_char, last_byte = match.end(), end
    return tokens


def count_tokens(text: str, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> int:
    """Token count without building Token objects."""
    if not text:
        return 0
    if tokenizer.kind == "bpe":
        return len(load_bpe_encoding(tokenizer.vocab_path).encode_ordinary(text))
    return len(TOKEN_PATTERN.findall(text))


def token_strings(text: str, lowercase: bool = True) -> List[str]:
    """Default-tokenizer surfaces, lowercased for counting and matching."""
    surfaces = TOKEN_PATTERN.findall(text)
    return [s.lower() for s in surfaces] if lowercase else surfaces


def word_strings(text: str, lowercase: bool = True) -> List[str]:
    """Default-tokenizer word runs only (punctuation dropped)."""
    words = WORD_PATTERN.findall(text)
    return [w.lower() for w in words] if lowercase else words


def _sentence_spans(text: str) -> List[Tuple[int, int]]:
    """Character spans of sentences; separators between them are whitespace only."""
    spans: List[Tuple[int, int]] = []
    length = len(text)
    start = 0
    for match in _TERMINATOR.finditer(text):
        end = match.end()
        cursor = end
        while cursor < length and text[cursor].isspace():
            cursor += 1
        at_end = cursor == length
        # boundary: terminator then end-of-text, or whitespace then an uppercase letter
        if at_end or (cursor > end and text[cursor].isupper()):
            spans.append((start, end))
            start = cursor
    if start < length:
        spans.append((start, length))

    trimmed = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            trimmed.append((s, e))
    return trimmed


def split_sentences(text: str, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> List[Sentence]:
    """
    Rule-based sentence segmentation.

    A boundary follows ".", "!" or "?" (optionally closed by quotes or brackets)
    when the next non-space character is uppercase or the text ends. Text with
    no terminator yields a single sentence.
    """
    if not text or text.isspace():
        return []

    sentences: List[Sentence] = []
    last_char, last_byte = 0, 0
    for s, e in _sentence_spans(text):
        start = last_byte + len(text[last_char:s].encode("utf-8"))
        sentence_text = text[s:e]
        end = start + len(sentence_text.encode("utf-8"))
        sentences.append(
            Sentence(
                text=sentence_text,
                token_count=count_tokens(sentence_text, tokenizer),
                byte_span=(start, end),
            )
        )
        last_char, last_byte = e, end
    return sentences


def chunk_document(
    doc: Document,
    target_tokens: int = DEFAULT_CHUNK_TARGET,
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
) -> List[Chunk]:
    """
    Greedy sentence-aligned chunking.

    Sentences are appended while the chunk total stays within target_tokens; a
    sentence that would overflow starts a new chunk. A single sentence longer
    than the target becomes its own chunk. Sentences are joined by one space.

    Raises:
        ValueError: If target_tokens < 1
    """
    if target_tokens < 1:
        raise ValueError(f"target_tokens must be >= 1, got {target_tokens}")

    sentences = [s for s in split_sentences(doc.text, tokenizer) if s.token_count > 0]
    chunks: List[Chunk] = []
    current: List[int] = []
    current_tokens = 0

    def close() -> None:
        chunks.append(
            Chunk(
                doc_id=doc.doc_id,
                chunk_index=len(chunks),
                text=" ".join(sentences[i].text for i in current),
                token_count=current_tokens,
                sentence_range=(current[0], current[-1]),
            )
        )

    for index, sentence in enumerate(sentences):
        if current and current_tokens + sentence.token_count > target_tokens:
            close()
            current, current_tokens = [], 0
        current.append(index)
        current_tokens += sentence.token_count
    if current:
        close()
    return chunks


def chunk_corpus(
    documents: List[Document],
    target_tokens: int = DEFAULT_CHUNK_TARGET,
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
) -> List[Chunk]:
    """Chunk every document, preserving corpus order."""
    chunks: List[Chunk] = []
    for doc in documents:
        chunks.extend(chunk_document(doc, target_tokens, tokenizer))
    return chunks
