"""
BM25 indexing and budget-constrained context selection

NOTE:
1.idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), so scores are never negative.
2.Selection is a strict prefix of the ranking: it stops at the first unit that would
  overflow the budget. Units are never truncated.
3.Budget accounting counts unit token_counts only; the "- " bullets and newlines added
  by render_context are not charged.
"""
import math
import re
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from app.core.errors import ConfigurationError
from app.database.datastore import iter_jsonl, read_json, write_json, write_jsonl
from app.database.schema_setup import validate_record
from app.text.schemas import DEFAULT_TOKENIZER, Chunk, TokenizerSpec
from app.text.utils import count_tokens, token_strings
from .schemas import (
    DEFAULT_B,
    DEFAULT_K1,
    INDEX_FORMAT_VERSION,
    Bm25Index,
    RankedContext,
    RetrievalUnit,
)

_WHITESPACE = re.compile(r"\s+")


def analyze(text: str) -> List[str]:
    """Lowercased default-tokenizer terms; punctuation-only tokens are dropped."""
    return [t for t in token_strings(text) if any(ch.isalnum() for ch in t)]


def build_index(units: Sequence[RetrievalUnit], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    """
    Build an inverted index over units.

    Raises:
        ValueError: If units is empty or a unit_id repeats
    """
    if not units:
        raise ValueError("Cannot build an index over zero units")

    lengths: Dict[str, int] = {}
    postings: Dict[str, Dict[str, int]] = defaultdict(dict)
    for unit in units:
        if unit.unit_id in lengths:
            raise ValueError(f"Duplicate unit_id: {unit.unit_id}")
        terms = analyze(unit.text)
        lengths[unit.unit_id] = len(terms)
        for term, tf in Counter(terms).items():
            postings[term][unit.unit_id] = tf

    return Bm25Index(
        k1=k1,
        b=b,
        n_docs=len(lengths),
        avgdl=sum(lengths.values()) / len(lengths),
        lengths=lengths,
        postings={term: dict(sorted(p.items())) for term, p in sorted(postings.items())},
    )


def idf(index: Bm25Index, term: str) -> float:
    df = index.doc_freq(term)
    return math.log(1 + (index.n_docs - df + 0.5) / (df + 0.5))


def _term_score(index: Bm25Index, tf: int, dl: int, term_idf: float) -> float:
    avgdl = index.avgdl or 1.0
    norm = index.k1 * (1 - index.b + index.b * dl / avgdl)
    return term_idf * tf * (index.k1 + 1) / (tf + norm)


def score(index: Bm25Index, query: str, unit_id: str) -> float:
    """
    BM25 score of one unit for a query.

    Raises:
        KeyError: If unit_id is not in the index
    """
    if unit_id not in index.lengths:
        raise KeyError(f"Unknown unit_id: {unit_id}")
    dl = index.lengths[unit_id]
    total = 0.0
    for term in analyze(query):
        tf = index.postings.get(term, {}).get(unit_id, 0)
        if tf:
            total += _term_score(index, tf, dl, idf(index, term))
    return total


def score_all(index: Bm25Index, query: str) -> Dict[str, float]:
    """Scores for every unit, accumulated term-at-a-time from the postings."""
    scores = {unit_id: 0.0 for unit_id in index.lengths}
    for term in analyze(query):
        posting = index.postings.get(term)
        if not posting:
            continue
        term_idf = idf(index, term)
        for unit_id, tf in posting.items():
            scores[unit_id] += _term_score(index, tf, index.lengths[unit_id], term_idf)
    return scores


def score_naive(units: Sequence[RetrievalUnit], query: str, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Dict[str, float]:
    """Recompute every statistic from raw texts, with no index."""
    docs = {unit.unit_id: analyze(unit.text) for unit in units}
    n_docs = len(docs)
    avgdl = (sum(len(d) for d in docs.values()) / n_docs) or 1.0
    scores = {}
    for unit_id, terms in docs.items():
        total = 0.0
        for term in analyze(query):
            tf = terms.count(term)
            if not tf:
                continue
            df = sum(1 for d in docs.values() if term in d)
            term_idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            total += term_idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(terms) / avgdl))
        scores[unit_id] = total
    return scores


def rank(index: Bm25Index, query: str) -> List[tuple]:
    """All units as (unit_id, score), score descending, ties by ascending unit_id."""
    scores = score_all(index, query)
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))


def retrieve_under_budget(
    index: Bm25Index,
    units: Sequence[RetrievalUnit],
    query: str,
    budget_b: int,
) -> RankedContext:
    """
    Rank every unit and keep the longest prefix that fits the budget.

    Args:
        index: Index built over units
        units: The indexed units (for token counts)
        query: Question text
        budget_b: Context budget in tokens

    Returns:
        RankedContext: hits for all units, plus the selected prefix
    """
    if budget_b < 0:
        raise ValueError(f"budget_b must be >= 0, got {budget_b}")
    token_counts = {unit.unit_id: unit.token_count for unit in units}
    hits = rank(index, query)

    selected: List[str] = []
    used = 0
    for unit_id, _ in hits:
        cost = token_counts[unit_id]
        if used + cost > budget_b:
            break
        selected.append(unit_id)
        used += cost
    return RankedContext(query=query, budget_b=budget_b, hits=hits, selected=selected, used_tokens=used)


def render_context(ctx: RankedContext, units: Iterable[RetrievalUnit]) -> str:
    """Selected units as "- <text>" lines in rank order."""
    by_id = {unit.unit_id: unit for unit in units}
    return "\n".join(
        "- " + _WHITESPACE.sub(" ", by_id[unit_id].text).strip() for unit_id in ctx.selected
    )


def save_index(index: Bm25Index, path: Path) -> None:
    write_json(path, index.model_dump())


def load_index(path: Path) -> Bm25Index:
    """
    Raises:
        ConfigurationError: If the dump was written by another format version
    """
    payload = read_json(path)
    if payload.get("version") != INDEX_FORMAT_VERSION:
        raise ConfigurationError(f"Unsupported index version {payload.get('version')}", str(path))
    return Bm25Index(**payload)


def chunks_to_units(chunks: Iterable[Chunk], tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> List[RetrievalUnit]:
    """Baseline units: one per chunk, id "<doc_id>#<chunk_index>"."""
    return [
        RetrievalUnit(
            unit_id=f"{chunk.doc_id}#{chunk.chunk_index:05d}",
            kind="chunk",
            text=chunk.text,
            token_count=count_tokens(chunk.text, tokenizer),
            doc_id=chunk.doc_id,
            chunk_index=chunk.chunk_index,
        )
        for chunk in chunks
    ]


def save_units(units: Sequence[RetrievalUnit], path: Path) -> int:
    return write_jsonl(path, (unit.to_record() for unit in units))


def load_units(path: Path) -> List[RetrievalUnit]:
    return [RetrievalUnit(**record) for _, record in iter_jsonl(path)]


def load_external_units(path: Path, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> List[RetrievalUnit]:
    """
    Read externally produced propositions ({unit_id, doc_id, text[, chunk_index]} per line).

    Raises:
        RecordError: On the first line that violates the schema
    """
    units = []
    for line_number, record in iter_jsonl(path):
        validate_record("external_unit", record, str(path), line_number)
        units.append(
            RetrievalUnit(
                unit_id=record["unit_id"],
                kind="external_proposition",
                text=record["text"],
                token_count=count_tokens(record["text"], tokenizer),
                doc_id=record["doc_id"],
                chunk_index=record.get("chunk_index"),
            )
        )
    return units


def units_for_document(units: Sequence[RetrievalUnit], doc_id: Optional[str]) -> List[RetrievalUnit]:
    """Units of one document, or all units when doc_id is None."""
    if doc_id is None:
        return list(units)
    return [unit for unit in units if unit.doc_id == doc_id]


def build_scoped_indexes(
    units: Sequence[RetrievalUnit],
    scope: str = "document",
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Dict[str, Bm25Index]:
    """
    One index per document ("document" scope) or a single "corpus" index.

    Raises:
        ValueError: On an unknown scope
    """
    if scope == "corpus":
        return {"corpus": build_index(units, k1, b)}
    if scope != "document":
        raise ValueError(f"Unknown retrieval scope: {scope}")
    doc_ids = sorted({unit.doc_id for unit in units})
    return {doc_id: build_index(units_for_document(units, doc_id), k1, b) for doc_id in doc_ids}


def index_key(scope: str, doc_id: str) -> str:
    return "corpus" if scope == "corpus" else doc_id


def save_scoped_indexes(indexes: Dict[str, Bm25Index], scope: str, path: Path) -> None:
    write_json(
        path,
        {
            "version": INDEX_FORMAT_VERSION,
            "scope": scope,
            "indexes": {key: index.model_dump() for key, index in sorted(indexes.items())},
        },
    )


def load_scoped_indexes(path: Path) -> tuple:
    """
    Returns:
        Tuple[str, Dict[str, Bm25Index]]: scope and indexes keyed by doc_id or "corpus"
    """
    payload = read_json(path)
    if payload.get("version") != INDEX_FORMAT_VERSION:
        raise ConfigurationError(f"Unsupported index version {payload.get('version')}", str(path))
    return payload["scope"], {key: Bm25Index(**dump) for key, dump in payload["indexes"].items()}
