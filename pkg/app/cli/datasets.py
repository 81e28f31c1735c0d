"""
Dataset adapters: the neutral corpus and task JSONL formats
"""
from pathlib import Path
from typing import List

from pydantic import ValidationError

from app.core.errors import RecordError
from app.database.datastore import iter_jsonl
from app.database.schema_setup import validate_record
from app.eval.schemas import QaTask
from app.text.schemas import Document


def load_corpus(path: Path) -> List[Document]:
    """
    Read {doc_id, text, meta?} lines.

    Raises:
        RecordError: On a schema violation or a repeated doc_id
    """
    documents: List[Document] = []
    seen = set()
    for line_number, record in iter_jsonl(path):
        validate_record("document", record, str(path), line_number)
        if record["doc_id"] in seen:
            raise RecordError(f"duplicate doc_id {record['doc_id']}", str(path), line_number)
        seen.add(record["doc_id"])
        documents.append(Document(doc_id=record["doc_id"], text=record["text"], meta=record.get("meta", {})))
    return documents


def load_tasks(path: Path) -> List[QaTask]:
    """
    Read {task_id, doc_id, question, answers[], options?, gold_index?} lines.

    Raises:
        RecordError: On a schema violation, a repeated task_id, or options without gold_index
    """
    tasks: List[QaTask] = []
    seen = set()
    for line_number, record in iter_jsonl(path):
        validate_record("task", record, str(path), line_number)
        if record["task_id"] in seen:
            raise RecordError(f"duplicate task_id {record['task_id']}", str(path), line_number)
        seen.add(record["task_id"])
        try:
            tasks.append(
                QaTask(
                    task_id=record["task_id"],
                    doc_id=record["doc_id"],
                    question=record["question"],
                    gold_answers=record["answers"],
                    options=record.get("options"),
                    gold_index=record.get("gold_index"),
                )
            )
        except ValidationError as e:
            raise RecordError(str(e.errors()[0]["msg"]), str(path), line_number) from e
    return tasks
