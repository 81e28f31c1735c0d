"""
Knowledge-base construction, union across sample runs, and persistence
"""
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from app.core.errors import RecordError
from app.database.datastore import iter_jsonl, read_json, write_json, write_jsonl
from app.database.schema_setup import validate_record
from app.retrieval.schemas import RetrievalUnit
from app.text.schemas import DEFAULT_TOKENIZER, TokenizerSpec
from app.text.utils import count_tokens
from .schemas import CORPUS_SCOPE, Edp, KbMeta, KnowledgeBase, make_edp_id


def make_kb_id(scope: str, runs: Iterable[int]) -> str:
    return f"{scope}:s" + "+".join(str(r) for r in sorted(set(runs)))


def _add(entries: Dict[str, Edp], edp: Edp) -> None:
    # equal EDPs keep the earliest (sample_run, chunk_index) so union is order-free
    current = entries.get(edp.edp_id)
    if current is None or edp.provenance_key < current.provenance_key:
        entries[edp.edp_id] = edp


def build_run_kb(edps: List[Edp], run: int, scope: str = CORPUS_SCOPE) -> KnowledgeBase:
    """
    Collect one sample run's EDPs into a deduplicated KB K^(run).

    Raises:
        ValueError: If any EDP belongs to another run, or to another document
            when the scope is a single document
    """
    entries: Dict[str, Edp] = {}
    for edp in edps:
        if edp.sample_run != run:
            raise ValueError(f"EDP {edp.edp_id} is from run {edp.sample_run}, expected run {run}")
        if scope != CORPUS_SCOPE and edp.doc_id != scope:
            raise ValueError(f"EDP {edp.edp_id} is from document {edp.doc_id}, outside scope {scope}")
        _add(entries, edp)
    return KnowledgeBase(
        kb_id=make_kb_id(scope, [run]),
        scope=scope,
        runs_included=frozenset({run}),
        entries=entries,
    )


def merge_kbs(kbs: List[KnowledgeBase]) -> KnowledgeBase:
    """
    Union KBs into K^final under edp_id.

    Raises:
        ValueError: If the list is empty or the scopes differ
    """
    if not kbs:
        raise ValueError("merge_kbs needs at least one knowledge base")
    scopes = {kb.scope for kb in kbs}
    if len(scopes) > 1:
        raise ValueError(f"Cannot merge knowledge bases with different scopes: {sorted(scopes)}")

    scope = kbs[0].scope
    entries: Dict[str, Edp] = {}
    runs = set()
    for kb in kbs:
        runs.update(kb.runs_included)
        for edp in kb.entries.values():
            _add(entries, edp)
    return KnowledgeBase(
        kb_id=make_kb_id(scope, runs),
        scope=scope,
        runs_included=frozenset(runs),
        entries=entries,
    )


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def save_kb(kb: KnowledgeBase, path: Path) -> int:
    """
    Write a KB as JSONL (one EDP per line, sorted by edp_id) plus a meta sidecar.

    Returns:
        int: Number of EDPs written
    """
    count = write_jsonl(path, (edp.to_record() for edp in kb.sorted_entries()))
    write_json(meta_path(path), kb.meta_record())
    return count


def load_kb(path: Path) -> KnowledgeBase:
    """
    Read a KB written by save_kb.

    Raises:
        RecordError: On the first malformed line; nothing is returned for partial files
    """
    entries: Dict[str, Edp] = {}
    source = str(path)
    for line_number, record in iter_jsonl(path):
        validate_record("edp", record, source, line_number)
        expected_id = make_edp_id(record["doc_id"], record["entity"], record["description"])
        if record["edp_id"] != expected_id:
            raise RecordError("edp_id does not match its content", source, line_number)
        edp = Edp(**record)
        if record["render_text"] != edp.render_text:
            raise RecordError("render_text does not match entity and description", source, line_number)
        if edp.edp_id in entries:
            raise RecordError(f"duplicate edp_id {edp.edp_id}", source, line_number)
        entries[edp.edp_id] = edp

    sidecar = meta_path(path)
    if sidecar.exists():
        meta = KbMeta(**read_json(sidecar))
        scope, runs = meta.scope, meta.runs_included
    else:
        scope = CORPUS_SCOPE
        runs = sorted({edp.sample_run for edp in entries.values()})
    return KnowledgeBase(
        kb_id=make_kb_id(scope, runs),
        scope=scope,
        runs_included=frozenset(runs),
        entries=entries,
    )


def edps_to_units(
    kb: KnowledgeBase,
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
    doc_id: Optional[str] = None,
) -> List[RetrievalUnit]:
    """Turn KB entries into retrieval units over their render_text."""
    units = []
    for edp in kb.sorted_entries():
        if doc_id is not None and edp.doc_id != doc_id:
            continue
        units.append(
            RetrievalUnit(
                unit_id=edp.edp_id,
                kind="edp",
                text=edp.render_text,
                token_count=count_tokens(edp.render_text, tokenizer),
                doc_id=edp.doc_id,
                chunk_index=edp.chunk_index,
                sample_run=edp.sample_run,
            )
        )
    return units
